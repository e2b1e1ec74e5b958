import numpy as np
import pytest

from conftest import make_vm
from gspmec.analytics import (
    best_response_gaps,
    check_ir,
    check_sne,
    compute_cost,
    profit_margin_ratio,
    queue_latencies,
    satisfaction,
    sne_bid_bounds,
    social_welfare,
    ue_latency,
    ue_qoe,
    vm_utility,
)
from gspmec.errors import DomainError, NoAllocations
from gspmec.gsp import RoundOutcome, build_queue, run_gsp_round


def outcome(lam, prices, vals, bids=None, thetas=None, rates=()):
    """Slot s won by VM s."""
    n = len(lam)
    vals = np.asarray(vals, dtype=float)
    return RoundOutcome(
        app_id=0,
        ue_ids=np.arange(n),
        sizes=np.full(n, 10.0),
        priorities=np.asarray(lam, dtype=float),
        winner=np.arange(n),
        prices=np.asarray(prices, dtype=float),
        vm_keys=[(1, i) for i in range(n)],
        ranked=np.arange(n),
        ranking_scores=np.ones(n),
        price_adjustment=np.asarray(rates, dtype=float),
        bids=vals.copy() if bids is None else np.asarray(bids, dtype=float),
        thetas=np.ones(n) if thetas is None else np.asarray(thetas, dtype=float),
        valuations=vals,
    )


def test_single_win_utility():
    o = outcome([0.5], [0.05], [0.04], thetas=[2.0])
    assert vm_utility(o)[0] == pytest.approx(0.01)


def test_price_at_valuation_gives_zero_utility():
    assert np.all(vm_utility(outcome([0.5, 0.2], [0.04, 0.05], [0.04, 0.05])) == 0)


def test_unallocated_vm_has_zero_utility():
    q = build_queue(0, [0], [10.0], [0.3])
    o = run_gsp_round(q, [make_vm(1, 0, bid=0.05), make_vm(1, 1, bid=0.06)], 1e-3)
    assert vm_utility(o)[o.slot_of() < 0] == pytest.approx([0.0])


def test_utility_sum_equals_slot_sum(rng):
    lam, p, v, th = rng.random(6), 0.05 + rng.random(6) / 100, np.full(6, 0.05), rng.random(6) + 0.5
    o = outcome(lam, p, v, thetas=th)
    assert vm_utility(o).sum() == pytest.approx(float(np.sum(lam * th * (p - v))), rel=1e-12)


def test_margin_ratio_and_empty_round():
    assert profit_margin_ratio(outcome([0.5], [0.05], [0.04])) == pytest.approx(20.0)
    o = outcome([0.5], [0.0], [0.04])
    o.winner[:] = -1
    with pytest.raises(NoAllocations):
        profit_margin_ratio(o)


def test_upload_time_uses_bits():
    # 10 MB at 80 Mbps is 1 s of upload; compute 10/32 s
    assert ue_latency(10.0, 80.0, 32.0) == pytest.approx(1.0 + 10.0 / 32.0)


def test_first_position_waits_nothing_and_waits_add_up():
    lat = queue_latencies([10.0, 10.0, 10.0], [80.0] * 3, [32.0] * 3)
    assert lat[0] == pytest.approx(1.0 + 10 / 32)
    assert lat[2] - lat[0] == pytest.approx(2 * 10 / 32)


def test_latency_rejects_zero_rate():
    with pytest.raises(DomainError):
        ue_latency(10.0, 0.0, 32.0)


def test_satisfaction_boundaries():
    assert satisfaction(0.2, 0.2) == 0.0
    assert satisfaction(0.1, 0.2) == pytest.approx(0.5)
    assert satisfaction(0.3, 0.2) == 0.0


def test_cost_in_compute_hours():
    assert compute_cost(3600 * 32.0, 32.0, 0.05) == pytest.approx(0.05)


def test_qoe_with_zero_spend():
    r = ue_qoe(np.zeros((1, 2)), np.zeros((1, 2)), np.array([20.0, 20.0]), 0.5, 0.5)
    assert list(r.cost) == [1.0, 1.0] and list(r.total) == [0.5, 0.5]


def test_over_budget_is_clamped_and_flagged():
    r = ue_qoe(np.zeros((1, 2)), np.array([[30.0, 5.0]]), np.array([10.0, 10.0]), 0.5, 0.5)
    assert r.cost[0] == 1.0 and list(r.over_budget) == [0]
    assert r.cost[1] == pytest.approx(0.5)


def test_welfare_without_allocations_counts_cost_terms():
    r = ue_qoe(np.zeros((1, 4)), np.zeros((1, 4)), np.full(4, 20.0), 0.5, 0.5)
    sw = social_welfare({1: 0.0}, r.total, served=np.zeros(4, bool), include_unserved=True)
    assert sw == pytest.approx(4 * 0.5 * 1.0)
    assert social_welfare({1: 0.0}, r.total, served=np.zeros(4, bool)) == 0.0


def test_welfare_of_zero_profit_market_is_qoe_sum():
    q = np.array([0.3, 0.4])
    assert social_welfare({1: 0.0, 2: 0.0}, q) == pytest.approx(0.7)


def test_ir_passes_with_low_bid_but_price_above_value():
    o = outcome([0.5], [0.041], [0.04], bids=[0.039])
    assert check_ir(o).passed


def test_ir_fails_when_price_under_value():
    o = outcome([0.5, 0.3], [0.05, 0.03], [0.04, 0.04])
    rep = check_ir(o)
    assert not rep.passed and rep.violators == [(1, 1)]


def test_sne_single_slot_is_vacuous():
    assert check_sne(outcome([0.5], [0.05], [0.04])).passed


def test_sne_violation_reports_pair():
    # slot 1 would rather take slot 0's terms: 0.2*0.002 < 0.5*0.01
    rep = check_sne(outcome([0.5, 0.2], [0.05, 0.042], [0.04, 0.04]))
    assert not rep.passed and rep.worst_pair == (1, 0)
    assert best_response_gaps(outcome([0.5, 0.2], [0.05, 0.042], [0.04, 0.04]))[1] > 0


def test_equal_utilities_are_an_equilibrium():
    # lam * (p - v) = 0.001 in every slot
    lam = np.array([0.5, 0.25, 0.125])
    o = outcome(lam, 0.04 + 0.001 / lam, [0.04] * 3)
    assert check_sne(o).passed


def test_bounds_collapse_to_next_bid_with_flat_inputs():
    bids = [0.04, 0.045, 0.05]
    o = outcome([0.3] * 3, [0.045, 0.05, 0.051], [0.04] * 3, bids=bids, rates=[1.0, 1.0])
    lo, hi = sne_bid_bounds(o)
    assert np.isnan(lo[0]) and np.isnan(hi[2])
    assert lo[1] == pytest.approx(0.05) and hi[1] == pytest.approx(0.05)


def test_zero_priority_ratio_leaves_value_terms():
    o = outcome([0.3, 0.0, 0.1], [0.045, 0.05, 0.051], [0.04, 0.042, 0.04],
                bids=[0.04, 0.045, 0.05], rates=[1.25, 1.1])
    lo, hi = sne_bid_bounds(o)
    assert hi[1] == pytest.approx(0.042 / 1.25) and lo[1] == pytest.approx(0.04 / 1.25)
