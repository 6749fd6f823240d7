import math
from collections import Counter
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simatch import bipartite as bp
from simatch import sis
from simatch.analytics import GAMMA2, GAMMA2_PRIME, PHI, PHI2

FIB1_N4 = [(1, 2, 3, 4), (2, 1, 3, 4), (1, 3, 2, 4), (1, 2, 4, 3), (2, 1, 4, 3)]


def test_probability_table_fixed_and_explicit_orders():
    g = bp.fibonacci(1, 4)
    p1 = [sis.path_probability(g, sis.FIXED, sis.UNIFORM, pi, exact=True) for pi in FIB1_N4]
    p2 = [sis.path_probability(g, sis.explicit((2, 3, 1, 4)), sis.UNIFORM, pi, exact=True) for pi in FIB1_N4]
    print("P1", p1, "P2", p2)
    assert p1 == [Fr(1, 8), Fr(1, 4), Fr(1, 4), Fr(1, 8), Fr(1, 4)]
    assert p2 == [Fr(1, 6), Fr(1, 6), Fr(1, 3), Fr(1, 6), Fr(1, 6)]


def test_three_matching_example_probabilities():
    g = bp.three_matching_example()
    got = [sis.path_probability(g, sis.FIXED, sis.UNIFORM, pi, exact=True) for pi in bp.enumerate_matchings(g)]
    assert got == [Fr(1, 4), Fr(1, 4), Fr(1, 2)]


def all_algorithms():
    for fam in (bp.FIB1, bp.FIB2, bp.DIST2):
        for name in sis.algorithms_for(fam):
            yield fam, name


@pytest.mark.parametrize("fam,name", list(all_algorithms()))
def test_probabilities_sum_to_one(fam, name):
    policy, rule = sis.resolve_algorithm(fam, name)
    for n in range(0, 8):
        g = bp.make_family(fam, n)
        exact = not rule.tuned
        total = sum(sis.path_probability(g, policy, rule, pi, exact) for pi in bp.enumerate_matchings(g))
        if exact:
            assert total == 1
        else:
            assert abs(total - 1) < 1e-12


def test_sampler_outcomes_sum_to_one():
    for fam, name in all_algorithms():
        policy, rule = sis.resolve_algorithm(fam, name)
        smp = sis.Sampler(bp.make_family(fam, 6), policy, rule)
        outs = smp.outcomes(smp.initial_state())
        assert abs(sum(p for _, p, _ in outs) - 1) < 1e-12


def test_trace_weight_for_deterministic_orders():
    rng = np.random.default_rng(4)
    for fam, name in all_algorithms():
        policy, rule = sis.resolve_algorithm(fam, name)
        if policy.is_random:
            continue
        g = bp.make_family(fam, 9)
        smp = sis.Sampler(g, policy, rule)
        for _ in range(20):
            tr = smp.sample(rng)
            assert g.is_matching(tr.matching)
            assert tr.logT == pytest.approx(-math.log(smp.path_probability(tr.matching)), abs=1e-12)


@pytest.mark.parametrize("fam", [bp.FIB1, bp.FIB2, bp.DIST2])
def test_random_order_weights_average_to_path_probability(fam):
    # summing the option probabilities over every order exhausts the order
    # randomness; the result is the marginal path probability
    policy, rule = sis.resolve_algorithm(fam, "random")
    for n in range(1, 7):
        g = bp.make_family(fam, n)
        smp = sis.Sampler(g, policy, rule, exact=True)
        for pi in bp.enumerate_matchings(g):
            assert smp.weight_expectation(pi, lambda p: p, Fr(1)) == smp.path_probability(pi)


def test_conditional_weights_estimate_path_probability():
    g = bp.fibonacci(1, 5)
    smp = sis.Sampler(g, sis.UNIFORM_RANDOM, sis.UNIFORM)
    rng = np.random.default_rng(0)
    pi = (2, 1, 3, 5, 4)
    est = np.mean([math.exp(-smp.conditional_log_weight(pi, rng)) for _ in range(20000)])
    print("mean 1/T", est, "P", smp.path_probability(pi))
    assert est == pytest.approx(smp.path_probability(pi), rel=0.02)


def test_random_order_trace_weights_are_sums_of_log_counts():
    g = bp.fibonacci(1, 6)
    smp = sis.Sampler(g, sis.UNIFORM_RANDOM, sis.UNIFORM)
    tr = smp.sample(np.random.default_rng(1))
    assert tr.logT == pytest.approx(sum(math.log(len(s.options)) for s in tr.steps))


def test_trace_line_roundtrip():
    g = bp.fibonacci(2, 8)
    smp = sis.Sampler(g, sis.GREEDY_CYCLE_FIB2, sis.UNIFORM)
    tr = smp.sample(np.random.default_rng(2))
    assert sis.DecisionTrace.from_line(tr.to_line()) == tr


def test_fixed_sampler_frequencies_match_probabilities():
    g = bp.distance(2, 5)
    smp = sis.Sampler(g, sis.FIXED, sis.DIST2_STAR_FIXED)
    rng = np.random.default_rng(3)
    counts = Counter(smp.sample(rng).matching for _ in range(20000))
    for pi, c in counts.items():
        p = smp.path_probability(pi)
        assert abs(c / 20000 - p) < 4 * math.sqrt(p * (1 - p) / 20000) + 1e-9


def test_tuned_tables():
    tab = sis.star_rule_tables()
    assert tab.fib_fixed == pytest.approx((1 / PHI, 1 / PHI**2))
    assert tab.fib_greedy == pytest.approx((1 / PHI**2, 1 / PHI**2, 1 / PHI**3))
    assert tab.fib2_fixed == pytest.approx((1 / PHI2, 1 / PHI2**2, 1 / PHI2**3))
    g, gp = GAMMA2, GAMMA2_PRIME
    assert tab.dist2_case1 == pytest.approx((1 / g, gp, gp / g, 1 / g**3, 1 / g**4))
    assert tab.dist2_case2 == pytest.approx((1 / (gp * g**2), 1 / (gp * g**3), 1 / g**2))
    for probs in (tab.fib_fixed, tab.fib_greedy, tab.fib2_fixed, tab.dist2_case1, tab.dist2_case2):
        assert math.fsum(probs) == pytest.approx(1, abs=1e-12)


def test_greedy_fib2_menu_structure():
    menu = sis.fib2_block_menu(1)
    assert sorted(Counter(length for _, length in menu).items()) == [(3, 4), (4, 3), (5, 2)]
    g = bp.fibonacci(2, 5)
    for assign, length in menu:
        assert {i for i, _ in assign} == set(range(1, length + 1))
        assert sorted(j for _, j in assign) == list(range(1, length + 1))
        assert all(j in g.nbrs(i) for i, j in assign)


def test_incompatible_combinations_rejected():
    with pytest.raises(sis.UnsupportedCombinationError):
        sis.Sampler(bp.distance(2, 5), sis.GREEDY_FIB1, sis.UNIFORM)
    with pytest.raises(sis.UnsupportedCombinationError):
        sis.Sampler(bp.fibonacci(1, 5), sis.FIXED, sis.DIST2_STAR_FIXED)
    with pytest.raises(sis.UnsupportedCombinationError):
        sis.resolve_algorithm(bp.DIST2, "greedy")
    with pytest.raises(ValueError):
        sis.Sampler(bp.fibonacci(1, 5), sis.FIXED, sis.FIB_STAR_FIXED, exact=True)
    with pytest.raises(bp.GraphError):
        sis.path_probability(bp.fibonacci(1, 3), sis.FIXED, sis.UNIFORM, (3, 2, 1))


def test_custom_graph_sampling_uses_matching_checks():
    g = bp.three_matching_example()
    smp = sis.Sampler(g, sis.UNIFORM_RANDOM, sis.UNIFORM, exact=True)
    total = sum(smp.path_probability(pi) for pi in bp.enumerate_matchings(g))
    assert total == 1


@given(st.integers(1, 25), st.integers(0, 2**32 - 1), st.sampled_from(list(all_algorithms())))
@settings(max_examples=60, deadline=None)
def test_samples_are_perfect_matchings(n, seed, fam_name):
    fam, name = fam_name
    policy, rule = sis.resolve_algorithm(fam, name)
    g = bp.make_family(fam, n)
    tr = sis.sample(g, policy, rule, np.random.default_rng(seed))
    assert g.is_matching(tr.matching)
    assert tr.logT >= 0 or rule.tuned
