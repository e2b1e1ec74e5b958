"""Randomized property suites: seller IR, equilibrium checks, and the
exact allocation solver against brute-force enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .analytics import check_ir, check_sne
from .bidding import update_bids
from .gsp import build_queue, run_gsp_round
from .orchestrator import run_simulation
from .presets import builtin_preset
from .scenario import StrategyKind
from .vcg import WdpInstance, solve_wdp_exact
from .workload import VmState

IR_STRATEGIES = ("RBB", "BB", "Truthful")
# all-RBB presets whose bid dynamics reach an exact fixed point
SNE_PRESETS = ("fig5_case3",)
SNE_FIXED_POINT_TOL = 1e-13
SNE_HORIZON = 2000
INJECTIONS = ("ir-violation",)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    cases: int
    failures: int = 0
    detail: str = ""


@dataclass
class VerifyReport:
    results: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def first_failure(self) -> SuiteResult | None:
        return next((r for r in self.results if not r.passed), None)


# --- IR ----------------------------------------------------------------------


def random_market(rng: np.random.Generator, n_slots: int, n_vms: int, n_servers: int = 3):
    """A queue and a VM pool with random priorities, qualities and valuations."""
    lam = np.sort(rng.uniform(0.05, 0.5, n_slots))[::-1]
    queue = build_queue(0, np.arange(n_slots), rng.uniform(5, 40, n_slots), lam)
    vms = []
    for m in range(n_vms):
        v = float(rng.uniform(0.02, 0.05))
        vms.append(
            VmState(
                server_id=int(rng.integers(1, n_servers + 1)),
                vm_index=m,
                app_id=0,
                valuation=v,
                vcpus=int(rng.integers(1, 3)),
                cpu_freq_ghz=3.2,
                compute_rate=24.0,
                quality=float(rng.uniform(0.5, 2.5)),
                current_bid=v,
            )
        )
    return queue, vms


def random_gsp_round(rng: np.random.Generator, strategy: str, epsilon: float = 1e-3):
    """Truthful opening round, one strategic bid update, then the scored round."""
    queue, vms = random_market(rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)))
    first = run_gsp_round(queue, vms, epsilon)
    theta_prev = [vm.quality for vm in vms]
    for vm in vms:
        vm.quality *= float(rng.uniform(0.9, 1.1))
    bids = update_bids(StrategyKind(strategy), vms, first, theta_prev, epsilon)
    for vm, b in zip(vms, bids):
        vm.current_bid = float(b)
    return run_gsp_round(queue, vms, epsilon)


def _violate(outcome):
    # valuations above every price: each winner loses money
    return replace(outcome, valuations=outcome.valuations + outcome.prices.max() + 1.0)


def ir_suite(n: int = 1000, seed: int = 0, inject: str | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    first = ""
    for i in range(n):
        out = random_gsp_round(rng, IR_STRATEGIES[i % len(IR_STRATEGIES)])
        if inject == "ir-violation" and i == 0:
            out = _violate(out)
        rep = check_ir(out)
        if not rep.passed:
            bad += 1
            if not first:
                first = f"round {i}: min utility {rep.utilities.min():.3g} for {rep.violators[0]}"
    return SuiteResult("IR", bad == 0, n, bad, first)


# --- WDP oracle ----------------------------------------------------------------


def brute_force_wdp(z: np.ndarray) -> float:
    """Best total value over every injective slot-to-VM assignment."""
    k, r = z.shape
    m = min(k, r)
    if m == 0:
        return 0.0
    best = 0.0
    if k <= r:
        for cols in itertools.permutations(range(r), k):
            best = max(best, sum(max(z[s, c], 0.0) for s, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(k), r):
            best = max(best, sum(max(z[s, c], 0.0) for c, s in enumerate(rows)))
    return float(best)


def wdp_oracle_suite(n: int = 1000, seed: int = 0, max_dim: int = 6) -> SuiteResult:
    """Integer-valued instances so that equal optima are equal floats."""
    rng = np.random.default_rng(seed)
    bad = 0
    first = ""
    for i in range(n):
        k, r = rng.integers(1, max_dim + 1, size=2)
        z = rng.integers(0, 1000, size=(k, r)).astype(np.float64)
        got = solve_wdp_exact(WdpInstance(z)).value
        want = brute_force_wdp(z)
        if got != want:
            bad += 1
            if not first:
                first = f"instance {i} ({k}x{r}): solver {got} vs enumeration {want}"
    return SuiteResult("WDP", bad == 0, n, bad, first)


# --- equilibrium ---------------------------------------------------------------


def sne_suite(
    presets: Sequence[str] = SNE_PRESETS,
    horizon: int = SNE_HORIZON,
    convergence_tol: float | None = SNE_FIXED_POINT_TOL,
    replications: int | None = 1,
    scenario_factory: Callable[[str], object] = builtin_preset,
) -> SuiteResult:
    """Residual and bid-bound checks at each preset's convergence slot.

    The defaults run the bid dynamics to an exact fixed point. Passing
    ``convergence_tol=None`` keeps each scenario's own tolerance, which
    stops far earlier on slowly settling markets.
    """
    bad = 0
    cases = 0
    first = ""
    for name in presets:
        scen = scenario_factory(name)
        changes = {}
        if convergence_tol is not None:
            changes["convergence_tol"] = convergence_tol
        if replications is not None:
            changes["replications"] = replications
        if changes:
            scen = scen.with_auction(**changes)
        rep = run_simulation(scen, "gsp", horizon, stop_at_convergence=True)
        if rep.convergence_slot is None:
            bad += 1
            first = first or f"{name}: bids did not converge in {horizon} slots"
            continue
        for out in rep.settled_outcomes():
            cases += 1
            s = check_sne(out)
            if not (s.passed and s.bounds_ok):
                bad += 1
                if not first:
                    first = (
                        f"{name} app {out.app_id} slot {rep.convergence_slot}: "
                        f"worst residual {s.worst:.3g}, bounds ok={s.bounds_ok}"
                    )
    return SuiteResult("SNE", bad == 0, cases, bad, first)


SUITES = ("IR", "SNE", "WDP")


def run_all(
    instances: int = 1000,
    seed: int = 0,
    inject: str | None = None,
    suites: Sequence[str] = SUITES,
) -> VerifyReport:
    report = VerifyReport()
    if "IR" in suites:
        report.results.append(ir_suite(instances, seed, inject))
    if "SNE" in suites:
        report.results.append(sne_suite())
    if "WDP" in suites:
        report.results.append(wdp_oracle_suite(instances, seed))
    return report
