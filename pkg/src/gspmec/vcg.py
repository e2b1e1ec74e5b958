"""Benchmark mechanism: exact winner determination plus Clarke-pivot payments.

The allocation problem gives every (slot, VM) pair the value
``z = lambda_s * theta_r / b_r``. Each VM is its own node, so per-server
capacity limits hold automatically and the problem is a maximum-weight
bipartite matching, solved exactly with the Hungarian method.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, PrecisionWarning
from .gsp import RoundOutcome, TaskQueue, _empty, rank_vms
from .workload import VmState

# relative slack under which a welfare difference counts as zero
_PIVOT_RTOL = 1e-12
# relative size below which a critical value counts as zero
_CRIT_RTOL = 1e-9


@dataclass(frozen=True)
class WdpInstance:
    """Slot x VM value matrix and, for reporting, each VM's server."""

    z: np.ndarray
    server_of: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 2:
            raise DomainError("z must be a 2-D slot x VM matrix")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise DomainError("z must be finite and non-negative")
        object.__setattr__(self, "z", z)

    @classmethod
    def from_bids(cls, priorities, thetas, bids, server_of=None) -> "WdpInstance":
        bids = np.asarray(bids, dtype=np.float64)
        if np.any(bids <= 0):
            raise DomainError("bids must be > 0")
        z = np.outer(np.asarray(priorities, dtype=np.float64), np.asarray(thetas, dtype=np.float64) / bids)
        return cls(z, None if server_of is None else np.asarray(server_of))


@dataclass(frozen=True)
class WdpSolution:
    # slot -> VM column, -1 when unserved
    assignment: np.ndarray
    value: float

    def matrix(self, n_vms: int) -> np.ndarray:
        x = np.zeros((self.assignment.shape[0], n_vms), dtype=np.int8)
        s = np.flatnonzero(self.assignment >= 0)
        x[s, self.assignment[s]] = 1
        return x


def _solve(z: np.ndarray) -> tuple[np.ndarray, float]:
    k, r = z.shape
    out = np.full(k, -1, dtype=np.int64)
    if k == 0 or r == 0:
        return out, 0.0
    rows, cols = linear_sum_assignment(z, maximize=True)
    keep = z[rows, cols] > 0
    out[rows[keep]] = cols[keep]
    return out, float(z[rows[keep], cols[keep]].sum())


def solve_wdp_exact(instance: WdpInstance) -> WdpSolution:
    """Maximum total value matching; pairs with zero value are never used."""
    assignment, value = _solve(instance.z)
    return WdpSolution(assignment, value)


def _without(z: np.ndarray, col: int) -> float:
    return _solve(np.delete(z, col, axis=1))[1]


def vcg_prices(
    instance: WdpInstance,
    solution: WdpSolution,
    priorities: Sequence[float],
    thetas: Sequence[float],
    valuations: Sequence[float],
) -> np.ndarray:
    """Clarke-pivot payment per slot in $/VM-hour (0 for unserved slots).

    The pivot is taken in value space: the winner's critical value is
    ``z - (W - W_without_r)``, the least value at which it keeps its slot.
    Mapping back through ``z = lambda * theta / price`` gives the highest
    asking price that still wins. A non-positive critical value (nobody
    could replace the winner) pays the valuation, and no payment falls
    below the valuation.
    """
    z = instance.z
    lam = np.asarray(priorities, dtype=np.float64)
    th = np.asarray(thetas, dtype=np.float64)
    vals = np.asarray(valuations, dtype=np.float64)
    total = solution.value
    prices = np.zeros(z.shape[0])
    # VMs with identical value columns are interchangeable: one re-solve each
    cache: dict[bytes, float] = {}
    for s in np.flatnonzero(solution.assignment >= 0):
        r = int(solution.assignment[s])
        sig = z[:, r].tobytes()
        if sig not in cache:
            cache[sig] = _without(z, r)
        w_minus = cache[sig]
        gap = total - w_minus
        if gap < -_PIVOT_RTOL * max(total, 1.0):
            warnings.warn(
                f"removing VM {r} raised the optimum by {-gap:.3g}", PrecisionWarning, stacklevel=2
            )
        if abs(gap) <= _PIVOT_RTOL * max(total, 1.0):
            gap = 0.0
        z_crit = z[s, r] - gap
        # round-off around a zero critical value would give an unbounded price
        if z_crit <= _CRIT_RTOL * max(total, 1.0):
            p = vals[r]
        else:
            p = lam[s] * th[r] / z_crit
        prices[s] = max(p, vals[r])
    return prices


def run_vcg_round(queue: TaskQueue, vms: Sequence[VmState]) -> RoundOutcome:
    """Exact allocation and VCG prices under truthful asks (bid = valuation)."""
    if len(vms) == 0 or len(queue) == 0:
        return _empty(queue, vms, "vcg")
    keys = [vm.key for vm in vms]
    thetas = np.array([vm.quality for vm in vms], dtype=np.float64)
    vals = np.array([vm.valuation for vm in vms], dtype=np.float64)
    inst = WdpInstance.from_bids(queue.priorities, thetas, vals, [k[0] for k in keys])
    sol = solve_wdp_exact(inst)
    prices = vcg_prices(inst, sol, queue.priorities, thetas, vals)
    order, y = rank_vms(thetas, vals, keys)
    return RoundOutcome(
        app_id=queue.app_id,
        ue_ids=queue.ue_ids,
        sizes=queue.sizes,
        priorities=queue.priorities,
        winner=sol.assignment.copy(),
        prices=prices,
        vm_keys=keys,
        ranked=order,
        ranking_scores=y,
        price_adjustment=np.empty(0),
        bids=vals.copy(),
        thetas=thetas,
        valuations=vals,
        mechanism="vcg",
        rejected=queue.rejected,
        extra={"wdp_value": sol.value},
    )
