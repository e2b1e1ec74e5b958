"""Seller-side bid updates between rounds.

Every strategy reads only the previous round's outcome (prices, slot
priorities, who won what); peers' current-round bids are never visible.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .errors import DegenerateQuality
from .gsp import RoundOutcome
from .scenario import StrategyKind
from .workload import VmState


def rbb_target_slot(
    theta_now: float,
    valuation: float,
    prev_prices: np.ndarray,
    priorities: np.ndarray,
    won_slot: int | None,
    restricted: bool = True,
    tie_tol: float = 0.0,
) -> int | None:
    """Slot index maximising ``priority * theta * (price - valuation)``.

    With ``restricted`` the search starts at the slot won last round (no
    climbing above it); a VM that won nothing searches every slot. Only
    slots that carried a price last round are candidates. Ties go to the
    highest-priority slot; see :func:`tie_band` for ``tie_tol``. Returns
    None when there is no candidate.
    """
    start = won_slot if (restricted and won_slot is not None) else 0
    idx, _ = kernels.best_slots(
        priorities, prev_prices, np.array([valuation]), np.array([start]),
        tie_atol=tie_band(priorities, tie_tol),
    )
    s = int(idx[0])
    return None if s < 0 else s


def tie_band(priorities: np.ndarray, bid_tol: float) -> float:
    """Utility gap below which two slots count as equally good.

    A price gap of ``bid_tol`` at the highest priority: slots closer than
    that cannot be told apart at the bid resolution the run converges to.
    Without it the top winner sits exactly on the indifference between the
    first two slots and flips between them on round-off.
    """
    if bid_tol <= 0 or len(priorities) == 0:
        return 0.0
    return float(bid_tol * np.max(priorities))


def rbb_bid(
    valuation: float,
    target: int,
    prev_prices: np.ndarray,
    priorities: np.ndarray,
    theta_prev: float,
    theta_now: float,
) -> float:
    """Balanced bid for ``target``: indifferent between the target at its old
    price and the slot above at a price equal to the new bid.

    The slot above the top one is taken to have twice its priority.
    Never returns less than ``valuation``.
    """
    if theta_now <= 0:
        raise DegenerateQuality("theta_now must be > 0")
    lam = priorities[target]
    lam_above = 2.0 * priorities[0] if target == 0 else priorities[target - 1]
    if lam_above <= 0:
        return valuation
    ratio = (lam * theta_prev) / (lam_above * theta_now)
    return max(valuation, valuation + ratio * (prev_prices[target] - valuation))


def _prev_slot_data(prev: RoundOutcome):
    served = np.flatnonzero(prev.winner >= 0)
    # served slots form a prefix of the queue
    n = int(served.shape[0])
    return prev.prices[:n], prev.priorities[:n]


def update_bids(
    strategy: StrategyKind,
    vms: Sequence[VmState],
    prev: RoundOutcome | None,
    theta_prev: Sequence[float],
    epsilon: float,
    tie_tol: float = 0.0,
) -> np.ndarray:
    """New bid for each VM in ``vms`` (one server, one processor).

    ``theta_prev`` holds each VM's quality score from the previous round.
    Without a previous outcome every strategy bids its valuation.
    ``tie_tol`` is the bid resolution used to break near-ties between slots.
    """
    vals = np.array([vm.valuation for vm in vms], dtype=np.float64)
    if prev is None or strategy.tag == "Truthful":
        return vals.copy()
    prices, lam = _prev_slot_data(prev)
    n = prices.shape[0]
    slot_of = prev.slot_of()
    pos = {key: i for i, key in enumerate(prev.vm_keys)}

    starts = np.zeros(len(vms), dtype=np.int64)
    if strategy.tag == "RBB":
        for i, vm in enumerate(vms):
            j = pos.get(vm.key)
            if j is not None and slot_of[j] >= 0:
                starts[i] = slot_of[j]
    targets, _ = kernels.best_slots(lam, prices, vals, starts, tie_atol=tie_band(lam, tie_tol))

    out = np.empty(len(vms))
    cb_margin = epsilon if strategy.cb_margin is None else strategy.cb_margin
    for i, vm in enumerate(vms):
        s = int(targets[i])
        if s < 0:
            out[i] = vm.current_bid if vm.current_bid > 0 else vals[i]
            continue
        p = prices[s]
        if strategy.tag in ("RBB", "BB"):
            if vm.quality <= 0:
                out[i] = vals[i]
            else:
                out[i] = rbb_bid(vals[i], s, prices, lam, theta_prev[i], vm.quality)
        elif strategy.tag == "AB":
            out[i] = max(vals[i], (1.0 - strategy.ab_margin) * p)
        elif strategy.tag == "CB":
            out[i] = max(vals[i], p + cb_margin)
        else:  # pragma: no cover - StrategyKind validates tags
            raise ValueError(strategy.tag)
    return out
