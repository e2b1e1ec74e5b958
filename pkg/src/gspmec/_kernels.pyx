# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the functions in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def adjustment_rates(theta_ranked):
    cdef double[::1] theta = np.ascontiguousarray(theta_ranked, dtype=np.float64)
    cdef Py_ssize_t n = theta.shape[0], k = 0, i
    cdef double[::1] pos = np.empty(n, dtype=np.float64)
    for i in range(n):
        if theta[i] > 0:
            pos[k] = theta[i]
            k += 1
    if k < 2:
        return np.empty(0, dtype=np.float64)
    out = np.empty(k - 1, dtype=np.float64)
    cdef double[::1] r = out
    for i in range(k - 1):
        r[i] = pos[i] / pos[i + 1]
    out.sort()
    return out[::-1].copy()


def gsp_prices(theta_ranked, bids_ranked, Py_ssize_t n_served, double epsilon, bint floor):
    cdef double[::1] bids = np.ascontiguousarray(bids_ranked, dtype=np.float64)
    rates_arr = adjustment_rates(theta_ranked)
    cdef double[::1] rates = rates_arr
    cdef Py_ssize_t n_ranked = bids.shape[0], n_rates = rates.shape[0], s, j
    prices_arr = np.empty(n_served, dtype=np.float64)
    cdef double[::1] prices = prices_arr
    cdef double p, rate
    for s in range(n_served):
        if s + 1 < n_ranked:
            if n_rates > 0:
                j = s if s < n_rates - 1 else n_rates - 1
                rate = rates[j]
            else:
                rate = 1.0
            p = rate * bids[s + 1]
        else:
            p = bids[s] + epsilon
        if floor and p < bids[s]:
            p = bids[s]
        prices[s] = p
    return prices_arr, rates_arr


def best_slots(lam_in, prices_in, values_in, starts_in, double tie_rtol=1e-9, double tie_atol=0.0):
    cdef double[::1] lam = np.ascontiguousarray(lam_in, dtype=np.float64)
    cdef double[::1] prices = np.ascontiguousarray(prices_in, dtype=np.float64)
    cdef double[::1] values = np.ascontiguousarray(values_in, dtype=np.float64)
    cdef long long[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef Py_ssize_t n = prices.shape[0], m = values.shape[0], i, s, arg
    idx_arr = np.full(m, -1, dtype=np.int64)
    best_arr = np.full(m, -np.inf)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] best = best_arr
    cdef double u, top, mag, tol, v
    for i in range(m):
        if starts[i] >= n:
            continue
        v = values[i]
        top = -INFINITY
        mag = 0.0
        for s in range(starts[i], n):
            u = lam[s] * (prices[s] - v)
            if u > top:
                top = u
            if fabs(u) > mag:
                mag = fabs(u)
        tol = tie_rtol * mag + tie_atol
        for s in range(starts[i], n):
            u = lam[s] * (prices[s] - v)
            if u >= top - tol:
                idx[i] = s
                best[i] = u
                break
    return idx_arr, best_arr
