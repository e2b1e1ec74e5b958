"""Repeated auction engine.

Each slot: draw tasks (and, for UEs without a fixed position, their
placement) for every replication, queue the tasks by priority, refresh VM
quality scores from the carried workload, collect bids, run the round,
advance workloads and record metrics. The allocation itself depends only
on priorities, quality scores and bids, so it is computed once per slot;
replications enter through the workload increment (mean assigned size)
and the latency/cost metrics (means over draws).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analytics
from .bidding import update_bids
from .channel import nearest_rates
from .errors import DomainError, GspMecError
from .gsp import RoundOutcome, TaskQueue, build_queue, run_gsp_round
from .scenario import Scenario, StrategyKind
from .vcg import run_vcg_round
from .workload import VmState, apply_assignment, refresh, vm_valuation

MECHANISMS = ("gsp", "vcg")
DEFAULT_HORIZON = 50
# slots kept after the convergence slot when stopping early
SETTLE_SLOTS = 5


class SimulationError(GspMecError):
    """A module error raised inside the loop, tagged with the slot."""

    def __init__(self, slot: int, cause: Exception):
        super().__init__(f"slot {slot}: {cause}")
        self.slot = slot
        self.cause = cause


@dataclass
class SimulationState:
    t: int
    vms: list[list[VmState]]
    history: list[list[RoundOutcome]] = field(default_factory=list)


@dataclass
class RunReport:
    scenario: str
    mechanism: str
    server_ids: tuple[int, ...]
    vm_keys: list[tuple[int, int, int]]
    bids: np.ndarray
    mean_bid: np.ndarray
    mean_price: np.ndarray
    server_utility: np.ndarray
    wins: np.ndarray
    margin: np.ndarray
    qoe: np.ndarray
    qoe_latency: np.ndarray
    qoe_cost: np.ndarray
    latency: np.ndarray
    social_welfare: np.ndarray
    unserved: np.ndarray
    rejected: np.ndarray
    convergence_slot: int | None
    outcomes: list[list[RoundOutcome]]

    @property
    def n_slots(self) -> int:
        return int(self.mean_price.shape[0])

    @property
    def final_bids(self) -> np.ndarray:
        return self.bids[-1] if self.n_slots else np.empty(0)

    @property
    def final_prices(self) -> list[np.ndarray]:
        return [o.prices[o.served] for o in self.outcomes[-1]] if self.outcomes else []

    def settled_slice(self) -> slice:
        """Slots from convergence onward, or the last few when the run never settled."""
        if self.convergence_slot is not None:
            return slice(self.convergence_slot - 1, None)
        return slice(max(self.n_slots - SETTLE_SLOTS, 0), None)

    def settled(self, series: str) -> np.ndarray | float:
        """Mean of a per-slot series over :meth:`settled_slice`."""
        arr = getattr(self, series)
        return np.nanmean(arr[self.settled_slice()], axis=0)

    def settled_outcomes(self) -> list[RoundOutcome]:
        """Outcomes of the convergence slot (empty if there is none)."""
        if self.convergence_slot is None:
            return []
        return self.outcomes[self.convergence_slot - 1]


def detect_convergence(bid_history: np.ndarray, tol: float) -> int | None:
    """First slot (1-based) whose bid change, and every later one, stays below ``tol``.

    The change at slot ``t`` is the largest ``|b(t) - b(t-1)|`` over VMs.
    """
    h = np.asarray(bid_history, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        return None
    d = np.abs(np.diff(h, axis=0)).max(axis=1) if h.shape[1] else np.zeros(h.shape[0] - 1)
    bad = np.flatnonzero(~(d < tol))
    first = 0 if bad.size == 0 else int(bad[-1]) + 1
    if first >= d.shape[0]:
        return None
    return first + 2


def generate_tasks(scenario: Scenario, t: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Task sizes per application, shape ``(replications, J)``.

    Static tasks all have the configured size. Poisson sizes are drawn
    around each UE's average and redrawn until at least 1 MB. ``t`` is
    accepted for symmetry with time-varying models; the stream position
    comes from ``rng``.
    """
    reps = scenario.auction.replications
    n_ue = len(scenario.ues)
    out = []
    for n in range(scenario.n_apps):
        if scenario.task_model.kind == "static":
            out.append(np.full((reps, n_ue), float(scenario.task_model.size_mb)))
            continue
        avg = np.array([ue.avg_task_size_mb[n] for ue in scenario.ues])
        sizes = rng.poisson(np.broadcast_to(avg, (reps, n_ue))).astype(np.float64)
        low = sizes < 1.0
        while low.any():
            sizes[low] = rng.poisson(np.broadcast_to(avg, (reps, n_ue))[low])
            low = sizes < 1.0
        out.append(sizes)
    return out


def _ue_rates(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    reps = scenario.auction.replications
    ues = scenario.ues
    xy = np.empty((reps, len(ues), 2))
    fixed = np.array([u.position is not None for u in ues])
    if fixed.any():
        xy[:, fixed] = np.array([u.position for u in ues if u.position is not None])
    if (~fixed).any():
        xy[:, ~fixed] = rng.uniform(0.0, scenario.area_m, size=(reps, int((~fixed).sum()), 2))
    ap = np.array([s.position if s.position is not None else (scenario.area_m / 2,) * 2 for s in scenario.servers])
    power = np.array([u.tx_power_dbm for u in ues])
    return nearest_rates(xy, ap, power, scenario.channel)


def priorities(scenario: Scenario, app: int, sizes: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Priority index per UE for one application.

    ``size_over_deadline``: average task size over the deadline. ``rate_weighted``: rate times the
    capacity requirement over (size * deadline * minimum CPU frequency),
    averaged over replications.
    """
    a = scenario.apps[app]
    if scenario.auction.priority_rule == "size_over_deadline":
        avg = np.array([ue.avg_task_size_mb[app] for ue in scenario.ues])
        return avg / a.deadline_ms
    lam = rates * a.capacity_req / (sizes * a.deadline_ms * a.min_cpu_freq_ghz)
    return lam.mean(axis=0)


def init_vms(scenario: Scenario) -> list[list[VmState]]:
    """VM pools per application; every VM starts idle with bid = valuation."""
    pools = []
    for n in range(scenario.n_apps):
        pool = []
        for s in scenario.servers:
            v = vm_valuation(s, n)
            for m in range(s.vm_count[n]):
                pool.append(
                    VmState(
                        server_id=s.id,
                        vm_index=m,
                        app_id=n,
                        valuation=v,
                        vcpus=s.vcpus[n],
                        cpu_freq_ghz=s.cpu_freq_ghz[n],
                        compute_rate=s.compute_rate[n],
                        current_bid=v,
                    )
                )
        pools.append(pool)
    return pools


def replay_round(outcome: RoundOutcome, epsilon: float, price_floor: bool = True) -> RoundOutcome:
    """Re-run a recorded round from the inputs stored in it."""
    queue = TaskQueue(
        outcome.app_id, outcome.ue_ids, outcome.sizes, outcome.priorities, len(outcome.ue_ids), outcome.rejected
    )
    vms = [
        VmState(k[0], k[1], outcome.app_id, float(v), 1, 1.0, 1.0, quality=float(th), current_bid=float(b))
        for k, v, th, b in zip(outcome.vm_keys, outcome.valuations, outcome.thetas, outcome.bids)
    ]
    if outcome.mechanism == "vcg":
        return run_vcg_round(queue, vms)
    return run_gsp_round(queue, vms, epsilon, price_floor)


def _group_by_server(pool: Sequence[VmState]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for i, vm in enumerate(pool):
        groups.setdefault(vm.server_id, []).append(i)
    return groups


def run_simulation(
    scenario: Scenario,
    mechanism: str = "gsp",
    horizon: int = DEFAULT_HORIZON,
    stop_at_convergence: bool = False,
) -> RunReport:
    """Play ``horizon`` auction slots and collect per-slot aggregates.

    With ``stop_at_convergence`` the run ends :data:`SETTLE_SLOTS` slots
    after bids first settle under the convergence tolerance.
    """
    if mechanism not in MECHANISMS:
        raise DomainError(f"unknown mechanism {mechanism!r}")
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    auc = scenario.auction
    rng = np.random.default_rng(auc.rng_seed)
    pools = init_vms(scenario)
    state = SimulationState(0, pools)
    server_ids = tuple(s.id for s in scenario.servers)
    col = {sid: i for i, sid in enumerate(server_ids)}
    vm_keys = [(vm.app_id, vm.server_id, vm.vm_index) for pool in pools for vm in pool]
    n_srv = len(server_ids)
    budgets = np.array([ue.budget for ue in scenario.ues])
    ue_index = {ue.id: j for j, ue in enumerate(scenario.ues)}
    cap = scenario.queue_capacity()
    deadlines_s = [a.deadline_ms / 1000.0 for a in scenario.apps]
    strategies = {sid: scenario.strategies.get(sid, StrategyKind()) for sid in server_ids}
    groups = [_group_by_server(pool) for pool in pools]

    rec: dict[str, list] = {k: [] for k in (
        "bids", "mean_bid", "mean_price", "server_utility", "wins", "margin", "qoe",
        "qoe_latency", "qoe_cost", "latency", "social_welfare", "unserved", "rejected")}
    prev: list[RoundOutcome | None] = [None] * scenario.n_apps
    streak = 0

    for t in range(1, horizon + 1):
        state.t = t
        try:
            sizes_by_app = generate_tasks(scenario, t, rng)
            rates = _ue_rates(scenario, rng)
            outcomes = []
            n_ue = len(scenario.ues)
            alpha = np.zeros((scenario.n_apps, n_ue))
            spend = np.zeros((scenario.n_apps, n_ue))
            admitted = np.zeros(n_ue, dtype=bool)
            served_ue = np.zeros(n_ue, dtype=bool)
            lat_sum, lat_n = 0.0, 0
            for n, pool in enumerate(pools):
                sizes = sizes_by_app[n]
                lam = priorities(scenario, n, sizes, rates)
                queue = build_queue(n, np.arange(n_ue), sizes.mean(axis=0), lam, cap)
                theta_prev = np.array([vm.quality for vm in pool])
                for vm in pool:
                    refresh(vm, scenario.apps[n], auc.slot_seconds, auc.gamma_min, auc.gamma_max)
                if mechanism == "gsp":
                    for sid, idx in groups[n].items():
                        group = [pool[i] for i in idx]
                        new = update_bids(
                            strategies[sid], group, prev[n], theta_prev[idx], auc.epsilon, auc.convergence_tol
                        )
                        for vm, b in zip(group, new):
                            vm.current_bid = float(b)
                    out = run_gsp_round(queue, pool, auc.epsilon, auc.price_floor)
                else:
                    for vm in pool:
                        vm.current_bid = vm.valuation
                    out = run_vcg_round(queue, pool)
                outcomes.append(out)
                prev[n] = out

                # workload update with the mean assigned size
                slot_of = out.slot_of()
                for i, vm in enumerate(pool):
                    s = slot_of[i]
                    apply_assignment(vm, float(out.sizes[s]) if s >= 0 else 0.0, auc.slot_seconds)

                # latency and spend per replication, in queue order over served slots
                ue_q = out.ue_ids
                admitted[ue_q] = True
                srv_slots = np.flatnonzero(out.winner >= 0)
                if srv_slots.size:
                    ues = ue_q[srv_slots]
                    comp = np.array([pool[r].compute_rate for r in out.winner[srv_slots]])
                    d = sizes[:, ues]
                    lat = analytics.queue_latencies(d, rates[:, ues], comp)
                    alpha[n, ues] = analytics.satisfaction(lat, deadlines_s[n]).mean(axis=0)
                    spend[n, ues] = analytics.compute_cost(d, comp, out.prices[srv_slots]).mean(axis=0)
                    served_ue[ues] = True
                    lat_sum += float(lat.mean(axis=0).sum())
                    lat_n += int(srv_slots.size)
        except GspMecError as exc:
            if isinstance(exc, SimulationError):
                raise
            raise SimulationError(t, exc) from exc
        state.history.append(outcomes)

        qoe = analytics.ue_qoe(alpha, spend, budgets, auc.qoe_latency_weight, auc.qoe_cost_weight)
        bids = np.array([vm.current_bid for pool in pools for vm in pool])
        mean_bid = np.full(n_srv, np.nan)
        util = np.zeros(n_srv)
        wins = np.zeros(n_srv, dtype=np.int64)
        all_keys = [vm.server_id for pool in pools for vm in pool]
        srv_arr = np.array(all_keys, dtype=np.int64)
        for sid, c in col.items():
            if np.any(srv_arr == sid):
                mean_bid[c] = bids[srv_arr == sid].mean()
        prices, margins = [], []
        for out in outcomes:
            for sid, u in analytics.server_utility(out).items():
                util[col[sid]] += u
            s = np.flatnonzero(out.winner >= 0)
            for r in out.winner[s]:
                wins[col[out.vm_keys[r][0]]] += 1
            prices.append(out.prices[s])
            if s.size:
                margins.append(analytics.profit_margin_ratio(out))
        prices = np.concatenate(prices) if prices else np.empty(0)
        rec["bids"].append(bids)
        rec["mean_bid"].append(mean_bid)
        rec["mean_price"].append(prices.mean() if prices.size else np.nan)
        rec["server_utility"].append(util)
        rec["wins"].append(wins)
        rec["margin"].append(float(np.mean(margins)) if margins else np.nan)
        mask = served_ue
        rec["qoe"].append(qoe.total[mask].mean() if mask.any() else np.nan)
        rec["qoe_latency"].append(qoe.latency[mask].mean() if mask.any() else np.nan)
        rec["qoe_cost"].append(qoe.cost[mask].mean() if mask.any() else np.nan)
        rec["latency"].append(lat_sum / lat_n if lat_n else np.nan)
        rec["social_welfare"].append(analytics.social_welfare(util, qoe.total, served_ue))
        rec["unserved"].append(sum(len(o.unserved) for o in outcomes))
        rec["rejected"].append(sum(len(o.rejected) for o in outcomes))

        if stop_at_convergence and t >= 2:
            d = np.abs(rec["bids"][-1] - rec["bids"][-2]).max() if bids.size else 0.0
            streak = streak + 1 if d < auc.convergence_tol else 0
            if streak >= SETTLE_SLOTS + 1:
                break

    def arr(key, width=None, dtype=np.float64):
        if rec[key]:
            return np.array(rec[key], dtype=dtype)
        return np.empty((0, width) if width is not None else 0, dtype=dtype)

    bids_hist = arr("bids", len(vm_keys))
    return RunReport(
        scenario=scenario.name,
        mechanism=mechanism,
        server_ids=server_ids,
        vm_keys=vm_keys,
        bids=bids_hist,
        mean_bid=arr("mean_bid", n_srv),
        mean_price=arr("mean_price"),
        server_utility=arr("server_utility", n_srv),
        wins=arr("wins", n_srv, np.int64),
        margin=arr("margin"),
        qoe=arr("qoe"),
        qoe_latency=arr("qoe_latency"),
        qoe_cost=arr("qoe_cost"),
        latency=arr("latency"),
        social_welfare=arr("social_welfare"),
        unserved=arr("unserved", dtype=np.int64),
        rejected=arr("rejected", dtype=np.int64),
        convergence_slot=detect_convergence(bids_hist, auc.convergence_tol),
        outcomes=state.history,
    )


SUMMARY_FIELDS = (
    "mean_price",
    "mean_bid",
    "margin",
    "social_welfare",
    "qoe",
    "qoe_latency",
    "qoe_cost",
    "latency",
    "unserved",
    "utility",
    "convergence_slot",
    "slots",
)


def summarize(report: RunReport) -> dict[str, float]:
    """Settled (post-convergence, or tail) means of the headline series."""
    if report.n_slots == 0:
        return {k: float("nan") for k in SUMMARY_FIELDS}
    return {
        "mean_price": float(report.settled("mean_price")),
        "mean_bid": float(np.nanmean(report.settled("mean_bid"))),
        "margin": float(report.settled("margin")),
        "social_welfare": float(report.settled("social_welfare")),
        "qoe": float(report.settled("qoe")),
        "qoe_latency": float(report.settled("qoe_latency")),
        "qoe_cost": float(report.settled("qoe_cost")),
        "latency": float(report.settled("latency")),
        "unserved": float(report.settled("unserved")),
        "utility": float(np.sum(report.settled("server_utility"))),
        "convergence_slot": float("nan") if report.convergence_slot is None else float(report.convergence_slot),
        "slots": float(report.n_slots),
    }


def _run_point(args) -> dict[str, float]:
    scenario, mechanism, horizon, stop = args
    return summarize(run_simulation(scenario, mechanism, horizon, stop_at_convergence=stop))


def run_sweep(
    points: Sequence[Scenario],
    mechanism: str = "gsp",
    horizon: int = DEFAULT_HORIZON,
    stop_at_convergence: bool = True,
    workers: int = 1,
) -> list[dict[str, float]]:
    """Summaries of independent runs, in input order.

    With ``workers > 1`` points run in separate processes; each owns its
    scenario and RNG, so results do not depend on the worker count.
    """
    jobs = [(p, mechanism, horizon, stop_at_convergence) for p in points]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_point(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, jobs))
