import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_vm
from gspmec.errors import DomainError
from gspmec.gsp import build_queue, price_adjustment_rates, priority_index, ranking_score, run_gsp_round
from gspmec.presets import EXAMPLE1_PRIORITIES, EXAMPLE1_VMS, example1_fixture

EPS = 1e-3


def queue(lams, sizes=None):
    lams = np.asarray(lams, dtype=float)
    sizes = np.full(lams.size, 10.0) if sizes is None else sizes
    return build_queue(0, np.arange(lams.size), sizes, lams)


def test_priority_from_average_size_and_deadline():
    assert priority_index(20.0, 200.0) == pytest.approx(0.1)
    assert priority_index(0.0, 200.0) == 0.0
    with pytest.raises(DomainError):
        priority_index(10.0, 0.0)


def test_example_queue_priorities():
    lam = [priority_index(100 * x, 100.0) for x in EXAMPLE1_PRIORITIES[0]]
    assert lam == pytest.approx([0.31, 0.20, 0.15, 0.09])


def test_queue_sorted_with_id_tiebreak_and_capacity_cut():
    q = build_queue(0, [5, 3, 9, 1], [1, 2, 3, 4], [0.2, 0.2, 0.5, 0.1], capacity=3)
    assert list(q.ue_ids) == [9, 3, 5]
    assert q.rejected == (1,)


def test_ranking_score():
    assert ranking_score(0.7, 0.7) == 1.0
    assert ranking_score(2.0, 0.5) == 4.0
    with pytest.raises(DomainError):
        ranking_score(1.0, 0.0)


def test_adjustment_rates():
    assert price_adjustment_rates([2.6, 2.1]) == pytest.approx([1.238], abs=5e-4)
    assert np.all(price_adjustment_rates([1.5] * 5) == 1.0)
    assert price_adjustment_rates([2.0]).size == 0


def test_adjustment_rates_sorted_descending():
    r = price_adjustment_rates([4.0, 2.0, 1.9, 1.0])
    assert list(r) == sorted(r, reverse=True)
    assert sorted(r) == pytest.approx(sorted([2.0, 2.0 / 1.9, 1.9]))


def test_example_queue_one_top_price_is_rate_times_next_bid():
    fx = example1_fixture()
    out = run_gsp_round(fx.queues[0], fx.vms[0], EPS)
    assert out.vm_keys[out.winner[0]] == (1, 1)
    assert out.price_adjustment[0] == pytest.approx(1.238, abs=1e-12)
    assert out.prices[0] == pytest.approx(1.238 * 0.22, abs=1e-12)


def test_halving_next_bid_halves_top_price():
    vms = [list(EXAMPLE1_VMS[0])]
    vms[0][1] = (2, 2, 2.0, 0.11)
    # the top VM bids lower too so the ranking survives; its price ignores its own bid
    vms[0][0] = (1, 1, 2.476, 0.08)
    fx = example1_fixture(vms=tuple(tuple(g) for g in vms), priorities=EXAMPLE1_PRIORITIES[:1])
    out = run_gsp_round(fx.queues[0], fx.vms[0], EPS)
    assert out.prices[0] == pytest.approx(0.13618, abs=1e-9)


def test_equal_quality_prices_are_next_bids():
    bids = [0.20, 0.22, 0.25, 0.30]
    vms = [make_vm(1, i, valuation=0.1, bid=b, quality=2.0) for i, b in enumerate(bids)]
    out = run_gsp_round(queue([0.4, 0.3, 0.2, 0.1]), vms, EPS)
    assert np.all(out.price_adjustment == 1.0)
    assert out.prices == pytest.approx([0.22, 0.25, 0.30, 0.30 + EPS])


def test_single_task_single_vm_pays_bid_plus_epsilon():
    out = run_gsp_round(queue([0.3]), [make_vm(bid=0.05)], EPS)
    assert out.prices[0] == pytest.approx(0.05 + EPS)


def test_shortfall_leaves_tail_unserved():
    vms = [make_vm(1, 0, bid=0.05), make_vm(2, 0, bid=0.06)]
    out = run_gsp_round(queue([0.3, 0.2, 0.1]), vms, EPS)
    assert out.unserved == [2]
    assert out.assignment_matrix()[2].sum() == 0
    # brute force: with 2 VMs at most 2 slots can be filled
    assert out.n_served == 2


def test_zero_quality_vm_ranked_last():
    vms = [make_vm(1, 0, bid=0.01, quality=0.0), make_vm(2, 0, bid=0.09, quality=1.0)]
    out = run_gsp_round(queue([0.3]), vms, EPS)
    assert out.vm_keys[out.winner[0]] == (2, 0)


def test_empty_auction_returns_empty_outcome():
    out = run_gsp_round(queue([0.3, 0.1]), [], EPS)
    assert out.n_served == 0 and list(out.prices) == [0.0, 0.0]


@st.composite
def markets(draw):
    k = draw(st.integers(1, 8))
    r = draw(st.integers(1, 8))
    lams = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    vms = [
        make_vm(
            draw(st.integers(1, 3)),
            i,
            valuation=draw(st.floats(0.01, 0.05)),
            bid=draw(st.floats(0.05, 0.1)),
            quality=draw(st.floats(0.1, 3.0)),
        )
        for i in range(r)
    ]
    return queue(lams), vms


@settings(max_examples=200, deadline=None)
@given(markets())
def test_assignment_is_partial_permutation(m):
    q, vms = m
    x = run_gsp_round(q, vms, EPS).assignment_matrix()
    assert np.all(x.sum(axis=0) <= 1) and np.all(x.sum(axis=1) <= 1)
    assert np.all(x.sum(axis=1)[: min(len(q), len(vms))] == 1)


@settings(max_examples=200, deadline=None)
@given(markets())
def test_winner_never_paid_below_own_bid(m):
    q, vms = m
    out = run_gsp_round(q, vms, EPS)
    s = np.flatnonzero(out.served)
    assert np.all(out.prices[s] >= out.bids[out.winner[s]])


@settings(max_examples=100, deadline=None)
@given(markets(), st.randoms(use_true_random=False))
def test_input_order_does_not_matter(m, rnd):
    q, vms = m
    a = run_gsp_round(q, vms, EPS)
    shuffled = list(vms)
    rnd.shuffle(shuffled)
    b = run_gsp_round(q, shuffled, EPS)
    assert [a.vm_keys[i] for i in a.winner[a.served]] == [b.vm_keys[i] for i in b.winner[b.served]]
    assert np.array_equal(a.prices, b.prices)


def test_rerun_is_bit_identical():
    fx = example1_fixture()
    a = run_gsp_round(fx.queues[2], fx.vms[2], EPS)
    b = run_gsp_round(fx.queues[2], fx.vms[2], EPS)
    assert np.array_equal(a.prices, b.prices) and np.array_equal(a.winner, b.winner)
