import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simatch import analytics as an
from simatch import bipartite as bp
from simatch import experiments as ex


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=60),
    st.lists(st.integers(1, 59), max_size=5),
)
def test_accumulator_merge_matches_direct(values, cuts):
    arr = np.array(values)
    cuts = sorted({c for c in cuts if c < len(arr)})
    acc = ex.LogAccumulator()
    for part in np.split(arr, cuts):
        acc = acc.merge(ex.LogAccumulator.from_array(part))
    ref = ex.LogAccumulator.from_array(arr)
    assert acc.count == ref.count
    assert acc.log_mean_T == pytest.approx(ref.log_mean_T, abs=1e-9)
    assert acc.empirical_n_var == pytest.approx(ref.empirical_n_var, rel=1e-9)
    assert acc.var_logT == pytest.approx(np.var(arr, ddof=1), rel=1e-7, abs=1e-9)
    assert acc.log_mean_T == pytest.approx(np.log(np.mean(np.exp(arr))), abs=1e-9)


def test_chunk_sizes():
    assert ex.chunk_sizes(5000, 2048) == [2048, 2048, 904]
    assert ex.chunk_sizes(4096, 2048) == [2048, 2048]


@pytest.mark.parametrize("algo", ["fixed", "greedy", "random"])
def test_reports_do_not_depend_on_workers(algo):
    reports = [ex.estimate_family(bp.FIB1, algo, 60, N=5000, seed=11, workers=w, chunk_size=512) for w in (1, 4)]
    print(reports[0])
    assert reports[0] == reports[1]
    assert reports[0].as_dict(with_time=False) == reports[1].as_dict(with_time=False)


def test_seed_changes_estimate():
    a = ex.estimate_family(bp.FIB1, "fixed", 40, N=3000, seed=1)
    b = ex.estimate_family(bp.FIB1, "fixed", 40, N=3000, seed=2)
    assert a.log_estimate != b.log_estimate


def test_single_vertex_graph():
    rep = ex.estimate_family(bp.FIB1, "fixed", 1, N=100, seed=0)
    assert rep.estimate == pytest.approx(1.0)
    assert rep.rel_stderr == 0.0 and rep.var_logT == 0.0


def test_fib1_n10_within_three_stderr():
    rep = ex.estimate_family(bp.FIB1, "fixed", 10, N=1_000_000, seed=3)
    print(rep.estimate, rep.rel_stderr)
    assert abs(rep.estimate - 89) <= 3 * rep.rel_stderr * 89


@pytest.mark.parametrize("family,algo", [(bp.FIB2, "greedy"), (bp.DIST2, "fixed-star"), (bp.FIB1, "greedy-star")])
def test_other_samplers_are_unbiased(family, algo):
    n = 30
    rep = ex.estimate_family(family, algo, n, N=40_000, seed=5)
    exact = bp.family_count(family, n)
    print(family, algo, rep.estimate / exact, rep.rel_stderr)
    assert abs(rep.estimate / exact - 1) <= 4 * rep.rel_stderr


def test_dist2_random_engine_small():
    rep = ex.estimate_family(bp.DIST2, "random", 8, N=3000, seed=0)
    exact = bp.family_count(bp.DIST2, 8)
    assert abs(rep.estimate / exact - 1) <= 4 * rep.rel_stderr


def test_unreliable_flag():
    rep = ex.estimate_family(bp.FIB1, "random", 400, N=50, seed=0)
    assert rep.unreliable == (rep.empirical_n_var > 5)


def test_invalid_sample_count():
    g, p, r = ex.family_setup(bp.FIB1, "fixed", 5)
    with pytest.raises(ValueError):
        ex.estimate_count(g, p, r, N=0)


def test_sample_log_weights_order_is_chunk_independent_of_workers():
    g, p, r = ex.family_setup(bp.FIB1, "greedy", 50)
    a = ex.sample_log_weights(g, p, r, 3000, seed=4, workers=1, chunk_size=700)
    b = ex.sample_log_weights(g, p, r, 3000, seed=4, workers=3, chunk_size=700)
    assert a.shape == (3000,) and np.array_equal(a, b)


def test_fixed_point_share():
    g, p, r = ex.family_setup(bp.FIB1, "fixed", 60)
    st_ = ex.estimate_statistic(g, p, r, lambda pi: pi[29] == 30, N=60_000, seed=1)
    print(st_)
    assert st_.ratio_estimate == pytest.approx(1 / math.sqrt(5), abs=0.01)
    assert st_.count_estimate == pytest.approx(st_.ratio_estimate * math.exp(st_.log_total_estimate), rel=1e-9)


def test_dist2_corner_probability():
    g, p, r = ex.family_setup(bp.DIST2, "fixed-star", 60)
    st_ = ex.estimate_statistic(g, p, r, lambda pi: pi[0] == 2, N=60_000, seed=2)
    print(st_)
    assert st_.ratio_estimate == pytest.approx(an.GAMMA2_PRIME, abs=0.01)


def test_trivial_predicates():
    g, p, r = ex.family_setup(bp.FIB1, "random", 30)
    yes = ex.estimate_statistic(g, p, r, lambda pi: True, N=2000, seed=0)
    no = ex.estimate_statistic(g, p, r, lambda pi: False, N=2000, seed=0)
    assert yes.ratio_estimate == pytest.approx(1.0)
    assert yes.count_estimate == pytest.approx(math.exp(yes.log_total_estimate))
    assert no.count_estimate == 0.0 and no.ratio_estimate == 0.0


def test_uniform_log_weights_mean_matches_moments():
    from simatch import moments as mo

    n = 80
    g, p, r = ex.family_setup(bp.FIB1, "fixed", n)
    logt = ex.uniform_log_weights(g, p, r, 20_000, seed=0)
    rep = mo.moments(bp.FIB1, "fixed", n)
    print(logt.mean(), rep.mean)
    assert logt.mean() == pytest.approx(rep.mean, abs=4 * math.sqrt(rep.variance / 20_000))


def test_run_clt_returns_diagnostics():
    d = ex.run_clt(bp.FIB1, "random", 200, N=4000, seed=0)
    assert d.samples == 4000
    assert abs(d.skewness) < 0.2


def test_star_sweep_rejects_untuned():
    rows = ex.star_variance_sweep(bp.FIB1, "fixed-star", (100, 200))
    assert len(rows) == 2
    with pytest.raises(ValueError):
        ex.star_variance_sweep(bp.FIB1, "fixed", (100,))


@pytest.mark.parametrize("tid", [2, 3, 4])
def test_table_shapes(tid):
    for mode in ("exact", "asymptotic"):
        t = ex.reproduce_table(tid, mode)
        assert all(len(vals) == len(t.ns) for _, vals in t.rows)
        csv = t.to_csv()
        assert csv.splitlines()[0].startswith("n,")
    with pytest.raises(ValueError):
        ex.reproduce_table(5)
    with pytest.raises(ValueError):
        ex.reproduce_table(2, "fast")
