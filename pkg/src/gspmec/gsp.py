"""One static position-auction round: rank VMs, match by position, price by the modified GSP rule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .workload import VmState


@dataclass(frozen=True)
class TaskQueue:
    """Tasks of one application, sorted by priority (highest first).

    ``rejected`` holds UE ids whose tasks did not fit in the ``capacity``
    positions of the queue.
    """

    app_id: int
    ue_ids: np.ndarray
    sizes: np.ndarray
    priorities: np.ndarray
    capacity: int
    rejected: tuple[int, ...] = ()

    def __len__(self) -> int:
        return int(self.ue_ids.shape[0])


def priority_index(avg_task_mb: float, deadline_ms: float) -> float:
    if deadline_ms <= 0:
        raise DomainError("deadline must be > 0")
    return avg_task_mb / deadline_ms


def build_queue(app_id, ue_ids, sizes, priorities, capacity: int | None = None) -> TaskQueue:
    """Sort tasks by priority (ties: lower UE id first) and cut at ``capacity``."""
    ue_ids = np.asarray(ue_ids, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.float64)
    priorities = np.asarray(priorities, dtype=np.float64)
    order = np.lexsort((ue_ids, -priorities))
    cap = len(order) if capacity is None else capacity
    keep, drop = order[:cap], order[cap:]
    return TaskQueue(
        app_id=app_id,
        ue_ids=ue_ids[keep],
        sizes=sizes[keep],
        priorities=priorities[keep],
        capacity=cap,
        rejected=tuple(int(u) for u in ue_ids[drop]),
    )


def ranking_score(theta: float, bid: float) -> float:
    if bid <= 0:
        raise DomainError(f"bid must be > 0, got {bid!r}")
    return theta / bid


def price_adjustment_rates(ranked_theta: Sequence[float]) -> np.ndarray:
    """Ratios of consecutive ranked quality scores, sorted descending.

    Zero-quality VMs sit at the bottom of the ranking and are left out, so
    the vector is empty unless at least two VMs have positive quality.
    """
    return kernels.adjustment_rates(np.asarray(ranked_theta, dtype=np.float64))


@dataclass
class RoundOutcome:
    """Result of one round at one processor.

    Slot-indexed arrays have one entry per queue position. ``winner[s]`` is
    an index into ``vm_keys`` (or -1 when the slot went unserved); prices of
    unserved slots are 0.
    """

    app_id: int
    ue_ids: np.ndarray
    sizes: np.ndarray
    priorities: np.ndarray
    winner: np.ndarray
    prices: np.ndarray
    vm_keys: list
    ranked: np.ndarray
    ranking_scores: np.ndarray
    price_adjustment: np.ndarray
    bids: np.ndarray
    thetas: np.ndarray
    valuations: np.ndarray
    mechanism: str = "gsp"
    rejected: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n_slots(self) -> int:
        return int(self.winner.shape[0])

    @property
    def served(self) -> np.ndarray:
        return self.winner >= 0

    @property
    def n_served(self) -> int:
        return int(self.served.sum())

    @property
    def unserved(self) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.winner < 0)]

    def assignment_matrix(self) -> np.ndarray:
        x = np.zeros((self.n_slots, len(self.vm_keys)), dtype=np.int8)
        s = np.flatnonzero(self.winner >= 0)
        x[s, self.winner[s]] = 1
        return x

    def slot_of(self) -> np.ndarray:
        """Slot won by each VM (vm_keys order), -1 if none."""
        out = np.full(len(self.vm_keys), -1, dtype=np.int64)
        s = np.flatnonzero(self.winner >= 0)
        out[self.winner[s]] = s
        return out


def _empty(queue: TaskQueue, vms: Sequence[VmState], mechanism: str) -> RoundOutcome:
    k = len(queue)
    return RoundOutcome(
        app_id=queue.app_id,
        ue_ids=queue.ue_ids,
        sizes=queue.sizes,
        priorities=queue.priorities,
        winner=np.full(k, -1, dtype=np.int64),
        prices=np.zeros(k),
        vm_keys=[vm.key for vm in vms],
        ranked=np.empty(0, dtype=np.int64),
        ranking_scores=np.empty(0),
        price_adjustment=np.empty(0),
        bids=np.array([vm.current_bid for vm in vms], dtype=np.float64),
        thetas=np.array([vm.quality for vm in vms], dtype=np.float64),
        valuations=np.array([vm.valuation for vm in vms], dtype=np.float64),
        mechanism=mechanism,
        rejected=queue.rejected,
    )


def rank_vms(thetas: np.ndarray, bids: np.ndarray, keys: Sequence[tuple[int, int]]):
    """Rank order (best first) by ``theta / bid``; ties by (server, vm index)."""
    if np.any(bids <= 0):
        bad = int(np.flatnonzero(bids <= 0)[0])
        raise DomainError(f"VM {keys[bad]} has non-positive bid {bids[bad]!r}")
    y = thetas / bids
    srv = np.array([k[0] for k in keys], dtype=np.int64)
    idx = np.array([k[1] for k in keys], dtype=np.int64)
    order = np.lexsort((idx, srv, -y))
    return order, y[order]


def run_gsp_round(
    queue: TaskQueue,
    vms: Sequence[VmState],
    epsilon: float,
    price_floor: bool = True,
) -> RoundOutcome:
    """Match queue positions to ranked VMs and settle GSP prices.

    Slot ``s`` goes to the VM ranked ``s``. Its price is the next-ranked
    VM's bid scaled by the ``s``-th largest adjustment rate (clamped to the
    smallest one); the lowest-ranked VM, when it wins, gets its bid plus
    ``epsilon``. Sorting the rates can push a price under the winner's own
    bid when qualities differ; ``price_floor`` lifts such prices to the bid.
    """
    if len(vms) == 0 or len(queue) == 0:
        return _empty(queue, vms, "gsp")
    keys = [vm.key for vm in vms]
    thetas = np.array([vm.quality for vm in vms], dtype=np.float64)
    bids = np.array([vm.current_bid for vm in vms], dtype=np.float64)
    vals = np.array([vm.valuation for vm in vms], dtype=np.float64)
    order, y = rank_vms(thetas, bids, keys)

    k = len(queue)
    n_served = min(k, len(vms))
    prices_ranked, rates = kernels.gsp_prices(
        thetas[order], bids[order], n_served, float(epsilon), bool(price_floor)
    )
    winner = np.full(k, -1, dtype=np.int64)
    winner[:n_served] = order[:n_served]
    prices = np.zeros(k)
    prices[:n_served] = prices_ranked
    return RoundOutcome(
        app_id=queue.app_id,
        ue_ids=queue.ue_ids,
        sizes=queue.sizes,
        priorities=queue.priorities,
        winner=winner,
        prices=prices,
        vm_keys=keys,
        ranked=order,
        ranking_scores=y,
        price_adjustment=rates,
        bids=bids,
        thetas=thetas,
        valuations=vals,
        mechanism="gsp",
        rejected=queue.rejected,
    )
