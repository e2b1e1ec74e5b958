"""Reference (pure Python + numpy) versions of the compiled kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
"""
from __future__ import annotations

import numpy as np


def adjustment_rates(theta_ranked):
    """Consecutive quality ratios over the positive-quality prefix, sorted descending."""
    theta = np.asarray(theta_ranked, dtype=np.float64)
    pos = theta[theta > 0]
    if pos.size < 2:
        return np.empty(0, dtype=np.float64)
    rates = pos[:-1] / pos[1:]
    return np.sort(rates)[::-1].copy()


def gsp_prices(theta_ranked, bids_ranked, n_served, epsilon, floor):
    """Prices for the first ``n_served`` rank positions.

    Position ``s`` is paid ``rates[min(s, len-1)] * bids[s+1]`` when a
    next-ranked VM exists, otherwise its own bid plus ``epsilon``. With
    ``floor`` set, no price falls below the winner's own bid.
    """
    bids = np.asarray(bids_ranked, dtype=np.float64)
    rates = adjustment_rates(theta_ranked)
    n_ranked = bids.shape[0]
    prices = np.empty(n_served, dtype=np.float64)
    for s in range(n_served):
        if s + 1 < n_ranked:
            rate = rates[min(s, rates.shape[0] - 1)] if rates.shape[0] else 1.0
            p = rate * bids[s + 1]
        else:
            p = bids[s] + epsilon
        if floor and p < bids[s]:
            p = bids[s]
        prices[s] = p
    return prices, rates


def best_slots(lam, prices, values, starts, tie_rtol=1e-9, tie_atol=0.0):
    """For each bidder ``i``, the slot ``s >= starts[i]`` maximising ``lam[s] * (prices[s] - values[i])``.

    Values within ``tie_rtol * max|u| + tie_atol`` of the maximum count as
    ties, and ties go to the lowest index. Bidders
    with no candidate slot get ``-1``. Returns ``(index, best_value)``.
    """
    lam = np.asarray(lam, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    n = prices.shape[0]
    m = len(values)
    idx = np.full(m, -1, dtype=np.int64)
    best = np.full(m, -np.inf)
    for i in range(m):
        st = int(starts[i])
        if st >= n:
            continue
        u = lam[st:] * (prices[st:] - values[i])
        top = u.max()
        tol = tie_rtol * np.abs(u).max() + tie_atol
        k = int(np.flatnonzero(u >= top - tol)[0])
        idx[i] = st + k
        best[i] = u[k]
    return idx, best
