import pytest
from hypothesis import given, settings, strategies as st

import pttc.engine as engine
from pttc.engine import PttcConfig, format_trace, run_exact_ttc, run_pttc
from pttc.instances import gen_lb_marginal, gen_random
from pttc.market import Allocation, brute_force_po, dominance_gap, is_ir
from pttc.privacy import PrivacyBudget, noise_bound_E

from conftest import markets, swap_market

ZERO = PttcConfig(None, seed=0, zero_noise=True)


def test_zero_noise_swap():
    m = swap_market()
    res = run_pttc(m, ZERO)
    assert res.allocation == Allocation((1, 0))
    assert len(res.trace.cycles) == 1
    # one deletion per round: the cycle clears in round 1, the empty nodes go in rounds 1 and 2
    assert res.trace.rounds == 2
    assert dominance_gap(m, res.allocation) == 0
    assert res.allocation == run_exact_ttc(m)


def test_zero_noise_swap_trace_golden():
    assert format_trace(run_pttc(swap_market(), ZERO).trace) == (
        "# zero_noise=1 E=0.0\n"
        "NOISE 1 0>0 0.0\n"
        "NOISE 1 0>1 0.0\n"
        "NOISE 1 1>0 0.0\n"
        "NOISE 1 1>1 0.0\n"
        "CYCLE 1 1 0>1,1>0 1\n"
        "SELECT 1 1 0>1 0\n"
        "SELECT 1 1 1>0 1\n"
        "DELETE 1 0\n"
        "NOISE 2 1>1 0.0\n"
        "DELETE 2 1\n"
    )


def test_zero_noise_chain_market_clears_cycle():
    m = gen_lb_marginal(5, 3, 1)
    a = run_pttc(m, ZERO).allocation
    assert a == Allocation((1, 2, 0, 2, 2))


def test_chain_market_without_cycle_keeps_endowments():
    m = gen_lb_marginal(5, 3, 0)
    assert run_pttc(m, ZERO).allocation == Allocation.identity(m)
    assert run_exact_ttc(m) == Allocation.identity(m)


def test_tiny_budget_returns_identity():
    m = gen_random(30, 3, seed=1)
    b = PrivacyBudget(0.01, 0.1, 0.1, 0.1, 3)
    assert noise_bound_E(b) > m.n
    res = run_pttc(m, PttcConfig(b, seed=4))
    assert res.allocation == Allocation.identity(m)
    assert res.trace.cycles == []
    assert is_ir(m, res.allocation)


def test_exact_ttc_swap():
    assert run_exact_ttc(swap_market()) == Allocation((1, 0))


@pytest.mark.parametrize("seed", range(10))
def test_exact_ttc_random_is_po(seed):
    m = gen_random(6, 3, seed)
    a = run_exact_ttc(m, seed)
    assert dominance_gap(m, a) == 0
    assert brute_force_po(m, a)


@settings(max_examples=200, deadline=None)
@given(markets(max_n=8, max_k=4), st.integers(0, 2**32))
def test_exact_ttc_is_ir_and_po(m, seed):
    a = run_exact_ttc(m, seed)
    assert is_ir(m, a)
    assert dominance_gap(m, a) == 0


@st.composite
def budgets_for(draw, k):
    return PrivacyBudget(
        draw(st.floats(0.1, 1e5)),
        draw(st.floats(1e-4, 0.5)),
        draw(st.floats(1e-4, 0.5)),
        draw(st.floats(1e-4, 0.5)),
        k,
    )


@settings(max_examples=200, deadline=None)
@given(st.data(), markets(max_n=25, max_k=4), st.integers(0, 2**32))
def test_pttc_always_ir_and_within_bounds(data, m, seed):
    b = data.draw(budgets_for(m.k))
    res = run_pttc(m, PttcConfig(b, seed))
    assert is_ir(m, res.allocation)
    tr = res.trace
    assert tr.rounds <= m.k
    assert all(c <= m.k**2 for c in tr.cycles_per_round().values())
    if tr.aborted:
        assert res.allocation == Allocation.identity(m)
    if tr.noise_bound_held:
        E = tr.E
        assert dominance_gap(m, res.allocation) <= m.k * (3 * E + 1) * (m.k * (m.k - 1) / 2 + m.k)


def test_replay_is_bit_exact():
    m = gen_random(40, 4, seed=2)
    b = PrivacyBudget(5000.0, 0.01, 0.01, 0.01, 4)
    first = run_pttc(m, PttcConfig(b, seed=99))
    second = run_pttc(m, PttcConfig(b, seed=99))
    assert format_trace(first.trace) == format_trace(second.trace)
    assert first.allocation == second.allocation
    other = run_pttc(m, PttcConfig(b, seed=100))
    assert format_trace(other.trace) != format_trace(first.trace)


def test_large_budget_trades_and_records_selections():
    m = gen_random(50, 3, seed=5)
    b = PrivacyBudget(1e5, 0.01, 0.01, 0.01, 3)
    res = run_pttc(m, PttcConfig(b, seed=1))
    assert res.trace.cycles
    for c in res.trace.cycles:
        for s in c.selections:
            assert len(s.agents) == c.capacity
    moved = {i for c in res.trace.cycles for s in c.selections for i in s.agents}
    for i in moved:
        head = next(s.arc[1] for c in res.trace.cycles for s in c.selections if i in s.agents)
        assert res.allocation[i] == head


def test_overcommitted_cycle_triggers_cleanup(monkeypatch):
    m = swap_market()

    def inflated(g, ep, E, rng, t, zero_noise=False):
        for arc in g.arcs.values():
            arc.noisy_weight = 2.0 if arc.key in ((0, 1), (1, 0)) else 0.0
        return []

    monkeypatch.setattr(engine, "apply_round_noise", inflated)
    res = run_pttc(m, PttcConfig(PrivacyBudget(1.0, 0.1, 0.1, 0.1, 2), seed=0))
    assert res.trace.aborted
    assert res.allocation == Allocation.identity(m)
    assert format_trace(res.trace).endswith("ABORT\n")


def test_budget_k_must_match():
    with pytest.raises(ValueError, match="k=3"):
        run_pttc(swap_market(), PttcConfig(PrivacyBudget(1.0, 0.1, 0.1, 0.1, 3)))


def test_config_needs_budget():
    with pytest.raises(ValueError):
        PttcConfig(None)


def test_invalid_market_rejected():
    from pttc.market import ExchangeMarket

    bad = ExchangeMarket.from_lists(2, [0], [[0, 0]])
    with pytest.raises(ValueError, match="permutation"):
        run_exact_ttc(bad)
