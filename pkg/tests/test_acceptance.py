"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary, then asserts it.
"""
import time

import numpy as np
import pytest

from conftest import make_vm, record_criterion
from gspmec.gsp import build_queue, run_gsp_round
from gspmec.orchestrator import run_simulation, run_sweep
from gspmec.presets import (
    EXAMPLE1_STATED_PRICE,
    builtin_preset,
    example1_fixture,
    multi_server_market,
    two_server_market,
    with_strategy,
    with_ue_count,
)
from gspmec.verify import ir_suite, sne_suite, wdp_oracle_suite

HORIZON = 50
_cache = {}


def settled_run(name_or_scenario, mechanism="gsp"):
    key = (name_or_scenario if isinstance(name_or_scenario, str) else name_or_scenario.name, mechanism)
    if key not in _cache:
        scen = builtin_preset(name_or_scenario) if isinstance(name_or_scenario, str) else name_or_scenario
        _cache[key] = run_simulation(scen, mechanism, HORIZON, stop_at_convergence=True)
    return _cache[key]


def settled_price(rep):
    return float(rep.settled("mean_price"))


def test_criterion_01_example_price():
    t0 = time.perf_counter()
    fx = example1_fixture()
    price = float(run_gsp_round(fx.queues[0], fx.vms[0], 1e-3).prices[0])
    dt = time.perf_counter() - t0
    ok = abs(price - EXAMPLE1_STATED_PRICE) <= 1e-6 and dt < 1.0
    record_criterion(1, ok, f"queue-1 top price {price:.6f} vs stated {EXAMPLE1_STATED_PRICE} ({dt:.3f}s)")
    assert ok


def test_criterion_02_static_convergence():
    t0 = time.perf_counter()
    rep = settled_run("fig5_case3")
    dt = time.perf_counter() - t0
    p = settled_price(rep)
    ok = rep.convergence_slot is not None and rep.convergence_slot <= HORIZON and 0.036 <= p <= 0.041 and dt < 30
    record_criterion(2, ok, f"fig5_case3 converged at slot {rep.convergence_slot}, price {p:.5f} ({dt:.1f}s)")
    assert ok


def test_criterion_03_monopoly_cases():
    parts, ok = [], True
    for name, dominant in (("fig5_case1", 0), ("fig5_case2", 1)):
        rep = settled_run(name)
        wins = rep.settled("wins")
        share = wins[dominant] / wins.sum()
        ok &= share > 0.9
        parts.append(f"{name} dominant share {share:.3f}")
        if name == "fig5_case1":
            p = settled_price(rep)
            ok &= abs(p - 0.0371) <= 0.08 * 0.0371
            parts.append(f"price {p:.5f}")
    record_criterion(3, ok, ", ".join(parts))
    assert ok


def test_criterion_04_vcg_benchmark():
    sym = two_server_market((80, 80), 150, static=True, valuations=(0.0354, 0.0354), name="symmetric")
    rep = run_simulation(sym, "vcg", 10)
    price_ok = np.all(np.abs(rep.mean_price - 0.0354) <= 1e-6)
    profit_ok = np.all(np.abs(rep.server_utility) <= 1e-9)
    lines = [f"symmetric VCG price ok={bool(price_ok)} profit ok={bool(profit_ok)}"]
    order_ok = True
    for name in ("fig5_case1", "fig5_case2", "fig5_case3", "fig6a", "fig6b"):
        g = settled_price(settled_run(name, "gsp"))
        v = settled_price(settled_run(name, "vcg"))
        order_ok &= g >= v
        lines.append(f"{name} gsp {g:.5f} {'>=' if g >= v else '<'} vcg {v:.5f}")
    ok = bool(price_ok and profit_ok and order_ok)
    record_criterion(4, ok, "; ".join(lines))
    assert ok


def test_criterion_05_ue_sweep_peak():
    t0 = time.perf_counter()
    js = [50, 150, 250, 350, 500]
    base = builtin_preset("fig6a")
    rows = run_sweep([with_ue_count(base, j) for j in js], "gsp", HORIZON)
    prices = np.array([r["mean_price"] for r in rows])
    peak = int(np.argmax(prices))
    unimodal = np.all(np.diff(prices[: peak + 1]) >= 0) and np.all(np.diff(prices[peak:]) <= 0)
    dt = time.perf_counter() - t0
    ok = bool(unimodal and js[peak] == 250 and dt < 300)
    detail = ", ".join(f"J={j}: {p:.5f}" for j, p in zip(js, prices))
    record_criterion(5, ok, f"{detail} (peak J={js[peak]}, {dt:.0f}s)")
    assert ok


def test_criterion_06_server_sweep():
    counts = [2, 3, 5]
    pts = [multi_server_market(i, 120 // i, 120, name=f"servers{i}") for i in counts]
    prices = np.array([r["mean_price"] for r in run_sweep(pts, "gsp", HORIZON)])
    ok = bool(np.all(np.diff(prices) > 0) and prices[-1] >= 1.08 * prices[0])
    detail = ", ".join(f"I={i}: {p:.5f}" for i, p in zip(counts, prices))
    record_criterion(6, ok, detail)
    assert ok


def test_criterion_07_strategy_ordering():
    base = builtin_preset("fig7")
    bids, margins = {}, {}
    for tag in ("AB", "RBB", "BB", "CB"):
        rep = settled_run(with_strategy(base, tag))
        bids[tag] = float(np.mean(rep.settled("mean_bid")))
        margins[tag] = float(rep.settled("margin"))
    margins["VCG"] = float(settled_run(base, "vcg").settled("margin"))
    bid_ok = bids["AB"] <= bids["RBB"] <= bids["BB"] <= bids["CB"]
    order = ["VCG", "AB", "RBB", "BB", "CB"]
    margin_ok = all(margins[a] < margins[b] for a, b in zip(order, order[1:]))
    band_ok = 1.0 <= margins["RBB"] <= 5.0
    ok = bool(bid_ok and margin_ok and band_ok)
    detail = "bids " + " ".join(f"{k}={v:.5f}" for k, v in bids.items())
    detail += "; margins% " + " ".join(f"{k}={margins[k]:.3f}" for k in order)
    record_criterion(7, ok, detail)
    assert ok


def test_criterion_08_individual_rationality():
    res = ir_suite(1000, seed=2024)
    record_criterion(8, res.passed, f"{res.cases} rounds, {res.failures} violations {res.detail}".strip())
    assert res.passed


def test_criterion_09_equilibrium_at_convergence():
    res = sne_suite(("fig5_case1", "fig5_case2", "fig5_case3"), horizon=HORIZON, convergence_tol=None, replications=None)
    record_criterion(9, res.passed, f"{res.cases} converged rounds, {res.failures} failing; {res.detail}")
    assert res.passed


def test_criterion_10_wdp_oracle():
    t0 = time.perf_counter()
    res = wdp_oracle_suite(1000, seed=99)
    dt = time.perf_counter() - t0
    ok = res.passed and dt < 30
    record_criterion(10, ok, f"{res.cases} instances, {res.failures} mismatches ({dt:.1f}s)")
    assert ok


def _round_time(r, rng, repeats=15):
    lam = rng.uniform(0.05, 0.2, r)
    q = build_queue(0, np.arange(r), np.full(r, 15.0), lam)
    vms = [make_vm(1 + i % 5, i, valuation=0.035, bid=float(b), quality=float(t))
           for i, (b, t) in enumerate(zip(rng.uniform(0.035, 0.04, r), rng.uniform(1, 3, r)))]
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_gsp_round(q, vms, 1e-3)
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_11_round_scaling():
    rng = np.random.default_rng(0)
    _round_time(200, rng, 3)
    t500, t1000 = _round_time(500, rng), _round_time(1000, rng)
    ratio = t1000 / t500
    ok = ratio < 2.6
    record_criterion(11, ok, f"R=500 {t500 * 1e3:.2f} ms, R=1000 {t1000 * 1e3:.2f} ms, ratio {ratio:.2f}")
    assert ok


def test_criterion_12_shape_only():
    # saturation at J = K: extra UEs are rejected and served welfare stops growing
    base = builtin_preset("fig9")
    js = [200, 300, 400]
    reps = [run_simulation(with_ue_count(base, j), "gsp", 10) for j in js]
    unserved = [float(r.rejected[-1] + r.unserved[-1]) for r in reps]
    served = [j - u for j, u in zip(js, unserved)]
    saturates = served[1] == 300 and served[2] == 300 and unserved[0] == 0
    # more VMs serve more of an oversubscribed population
    more_vms = multi_server_market(3, 150, 400, queue_capacity=400, name="fig9_more_vms")
    fewer_vms = multi_server_market(3, 100, 400, queue_capacity=400, name="fig9_fewer_vms")
    sw_more = float(run_simulation(more_vms, "gsp", 10).social_welfare[-1])
    sw_fewer = float(run_simulation(fewer_vms, "gsp", 10).social_welfare[-1])
    # large tasks push mean latency past the 200 ms deadline
    big = multi_server_market(3, 150, 250, queue_capacity=400, d_avg_range=(20.0, 100.0), name="fig10_big")
    lat = float(run_simulation(big, "gsp", 5).latency[-1])
    ok = bool(saturates and sw_more > sw_fewer and lat > 0.2)
    record_criterion(
        12, ok,
        f"served {served} of {js}; welfare R=450 {sw_more:.2f} > R=300 {sw_fewer:.2f}; "
        f"latency {lat:.2f}s > 0.2s (absolute magnitudes not compared)",
    )
    assert ok
