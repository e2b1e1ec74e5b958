"""Per-round metrics: seller utilities, UE latency and QoE, welfare, margins,
and the individual-rationality and equilibrium checks.

Units: task sizes in MB, uplink rates in Mbps (8 bits per byte), compute
rates in MB/s, latencies in seconds, prices in $/VM-hour. The cost a UE
pays is the compute time in hours times the slot price.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, NoAllocations
from .gsp import RoundOutcome

BITS_PER_BYTE = 8.0
SECONDS_PER_HOUR = 3600.0
IR_TOL = 1e-12
SNE_TOL = 1e-9


# --- sellers --------------------------------------------------------------


def vm_utility(outcome: RoundOutcome) -> np.ndarray:
    """``lambda_s * theta * (p_s - v)`` for each VM (``vm_keys`` order); 0 if it won nothing."""
    u = np.zeros(len(outcome.vm_keys))
    s = np.flatnonzero(outcome.winner >= 0)
    r = outcome.winner[s]
    u[r] = outcome.priorities[s] * outcome.thetas[r] * (outcome.prices[s] - outcome.valuations[r])
    return u


def server_utility(outcome: RoundOutcome) -> dict[int, float]:
    u = vm_utility(outcome)
    out: dict[int, float] = {}
    for (srv, _), x in zip(outcome.vm_keys, u):
        out[srv] = out.get(srv, 0.0) + float(x)
    return out


def profit_margin_ratio(outcome: RoundOutcome) -> float:
    """Mean over winning VMs of ``100 * (p - v) / p``."""
    s = np.flatnonzero(outcome.winner >= 0)
    if s.size == 0:
        raise NoAllocations("no served slot in this round")
    p = outcome.prices[s]
    v = outcome.valuations[outcome.winner[s]]
    return float(np.mean(100.0 * (p - v) / p))


# --- UEs ------------------------------------------------------------------


def ue_latency(
    size_mb: float, rate_mbps: float, compute_rate: float, wait_s: float = 0.0
) -> float:
    """Upload plus queueing plus compute time, in seconds."""
    if not rate_mbps > 0:
        raise DomainError(f"uplink rate must be > 0, got {rate_mbps!r}")
    if not compute_rate > 0:
        raise DomainError(f"compute rate must be > 0, got {compute_rate!r}")
    return BITS_PER_BYTE * size_mb / rate_mbps + wait_s + size_mb / compute_rate


def queue_latencies(sizes_mb, rates_mbps, compute_rates) -> np.ndarray:
    """Latency of each served slot given in queue order.

    A task waits for the compute time of every task above it in the queue.
    Arrays may carry a leading replication axis.
    """
    sizes = np.asarray(sizes_mb, dtype=np.float64)
    rates = np.asarray(rates_mbps, dtype=np.float64)
    comp = sizes / np.asarray(compute_rates, dtype=np.float64)
    if np.any(rates <= 0):
        raise DomainError("uplink rates must be > 0")
    wait = np.cumsum(comp, axis=-1) - comp
    return BITS_PER_BYTE * sizes / rates + wait + comp


def satisfaction(latency_s, deadline_s) -> np.ndarray:
    """``(tau - delta) / tau`` inside the deadline, 0 outside it."""
    d = np.asarray(latency_s, dtype=np.float64)
    tau = np.asarray(deadline_s, dtype=np.float64)
    ok = (d > 0) & (d <= tau)
    return np.where(ok, np.abs(tau - d) / tau, 0.0)


def compute_cost(sizes_mb, compute_rates, prices) -> np.ndarray:
    """Dollar cost of each served task: compute hours times price."""
    hours = np.asarray(sizes_mb, dtype=np.float64) / np.asarray(compute_rates, dtype=np.float64)
    return hours / SECONDS_PER_HOUR * np.asarray(prices, dtype=np.float64)


@dataclass
class QoeResult:
    latency: np.ndarray
    cost: np.ndarray
    total: np.ndarray
    # UEs whose spend exceeded the budget (cost score clamped to 1)
    over_budget: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def ue_qoe(
    alpha: np.ndarray,
    spend: np.ndarray,
    budget: np.ndarray,
    latency_weight: float,
    cost_weight: float,
) -> QoeResult:
    """Latency score, budget-savings score and their weighted sum per UE.

    ``alpha`` and ``spend`` are ``(n_apps, n_ues)``; unserved entries hold 0.
    The latency score averages over applications, spend adds up.
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    spend = np.atleast_2d(np.asarray(spend, dtype=np.float64))
    budget = np.asarray(budget, dtype=np.float64)
    if np.any(budget <= 0):
        raise DomainError("budget must be > 0")
    q_lat = alpha.mean(axis=0)
    a = spend.sum(axis=0)
    q_cost = np.abs(budget - a) / budget
    over = np.flatnonzero(a > budget)
    q_cost = np.minimum(q_cost, 1.0)
    return QoeResult(q_lat, q_cost, latency_weight * q_lat + cost_weight * q_cost, over)


def social_welfare(
    server_utils: Mapping[int, float] | Sequence[float],
    qoe_total: np.ndarray,
    served: np.ndarray | None = None,
    include_unserved: bool = False,
) -> float:
    """Composite welfare: seller utilities plus UE QoE.

    By default only UEs that got a VM contribute QoE; an unserved UE is
    rejected for the slot. ``include_unserved`` counts every queued UE.
    """
    vals = server_utils.values() if isinstance(server_utils, Mapping) else server_utils
    q = np.asarray(qoe_total, dtype=np.float64)
    if served is not None and not include_unserved:
        q = q[np.asarray(served, dtype=bool)]
    return float(sum(vals)) + float(q.sum())


# --- equilibrium checks ---------------------------------------------------


@dataclass
class IrReport:
    passed: bool
    violators: list = field(default_factory=list)
    utilities: np.ndarray = field(default_factory=lambda: np.empty(0))


def check_ir(outcome: RoundOutcome, valuations: Sequence[float] | None = None) -> IrReport:
    """Every allocated VM must earn at least ``-1e-12``."""
    if valuations is not None:
        outcome = _with_valuations(outcome, valuations)
    u = vm_utility(outcome)
    won = outcome.slot_of() >= 0
    bad = np.flatnonzero(won & (u < -IR_TOL))
    return IrReport(bad.size == 0, [outcome.vm_keys[i] for i in bad], u)


def _with_valuations(outcome: RoundOutcome, valuations) -> RoundOutcome:
    from dataclasses import replace

    return replace(outcome, valuations=np.asarray(valuations, dtype=np.float64))


@dataclass
class SneReport:
    # residual[s, s'] = lambda_s (p_s - v_s) - lambda_s' (p_s' - v_s), served slots only
    residuals: np.ndarray
    passed: bool
    worst: float
    worst_pair: tuple[int, int] | None
    lower: np.ndarray
    upper: np.ndarray
    bids: np.ndarray
    within_bounds: np.ndarray

    @property
    def bounds_ok(self) -> bool:
        return bool(np.all(self.within_bounds[~np.isnan(self.lower)]))


def sne_residuals(priorities, prices, winner_values) -> np.ndarray:
    """Matrix of ``lambda_s (p_s - v_s) - lambda_t (p_t - v_s)`` over served slots."""
    lam = np.asarray(priorities, dtype=np.float64)
    p = np.asarray(prices, dtype=np.float64)
    v = np.asarray(winner_values, dtype=np.float64)
    own = lam * (p - v)
    other = lam[None, :] * (p[None, :] - v[:, None])
    return own[:, None] - other


def sne_bid_bounds(outcome: RoundOutcome) -> tuple[np.ndarray, np.ndarray]:
    """Break-even bid range for the VM in each served slot.

    For slot ``s`` with neighbours above and below (all served), with
    ``k = lambda_s / lambda_{s-1}`` and ``T_s`` the adjustment rate applied
    to slot ``s``'s price::

        upper = v_s / T_{s-1}     + k T_s / T_{s-1} (b_{s+1} - v_s)
        lower = v_{s-1} / T_{s-1} + k T_s / T_{s-1} (b_{s+1} - v_{s-1})

    The upper bound is the highest bid at which the VM in ``s`` still does
    not gain by taking slot ``s-1``; the lower bound is the lowest at which
    the VM in ``s-1`` still does not gain by dropping to ``s``. Slots
    without both neighbours get NaN.
    """
    served = np.flatnonzero(outcome.winner >= 0)
    n = served.size
    lower = np.full(n, np.nan)
    upper = np.full(n, np.nan)
    rates = outcome.price_adjustment
    r = outcome.winner[served]
    v = outcome.valuations[r]
    b = outcome.bids[r]
    lam = outcome.priorities[served]
    for s in range(1, n - 1):
        b_next = b[s + 1]
        if lam[s - 1] <= 0:
            continue
        k = lam[s] / lam[s - 1]
        t_up = _rate(rates, s - 1)
        t_here = _rate(rates, s)
        upper[s] = v[s] / t_up + k * t_here / t_up * (b_next - v[s])
        lower[s] = v[s - 1] / t_up + k * t_here / t_up * (b_next - v[s - 1])
    return lower, upper


def _rate(rates: np.ndarray, s: int) -> float:
    if rates.size == 0:
        return 1.0
    return float(rates[min(s, rates.size - 1)])


def check_sne(outcome: RoundOutcome, bound_tol: float = SNE_TOL) -> SneReport:
    """Pairwise no-envy residuals and the break-even bid bounds for one round."""
    served = np.flatnonzero(outcome.winner >= 0)
    r = outcome.winner[served]
    res = sne_residuals(outcome.priorities[served], outcome.prices[served], outcome.valuations[r])
    lower, upper = sne_bid_bounds(outcome)
    bids = outcome.bids[r]
    within = np.where(
        np.isnan(lower), True, (bids >= lower - bound_tol) & (bids <= upper + bound_tol)
    )
    if res.size:
        flat = int(np.argmin(res))
        worst = float(res.flat[flat])
        pair = tuple(int(x) for x in np.unravel_index(flat, res.shape))
    else:
        worst, pair = 0.0, None
    return SneReport(
        residuals=res,
        passed=worst >= -SNE_TOL,
        worst=worst,
        worst_pair=pair if worst < -SNE_TOL else None,
        lower=lower,
        upper=upper,
        bids=bids,
        within_bounds=within,
    )


def best_response_gaps(outcome: RoundOutcome) -> np.ndarray:
    """For each served slot, how much its winner would gain by taking the best other slot's terms.

    Positive entries mean a profitable unilateral swap exists.
    """
    served = np.flatnonzero(outcome.winner >= 0)
    r = outcome.winner[served]
    res = sne_residuals(outcome.priorities[served], outcome.prices[served], outcome.valuations[r])
    if res.size == 0:
        return np.empty(0)
    return -res.min(axis=1)
