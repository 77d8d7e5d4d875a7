import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commentdyn import distributions as dist
from commentdyn import synthgen as sg
from commentdyn.fitting import fit_all_posts
from commentdyn.goodness import (BOOTSTRAP_NOTE, epsilon, error_by_publish_hour, fit_epsilon,
                                 hourly_spread, ks_statistic, ks_test_montecarlo)
from commentdyn.intervals import IntervalSeries

from conftest import make_corpus

BINS = np.arange(0, 50)


def test_epsilon_trivial_cases():
    f = lambda t: np.minimum(t / 60.0, 1.0)
    assert epsilon(f, f, BINS).value == 0.0
    assert epsilon(lambda t: f(t) + 0.01, f, BINS).value == pytest.approx(0.01, abs=1e-15)
    r = epsilon(lambda t: np.ones(t.shape), lambda t: np.zeros(t.shape), BINS)
    assert r.value == 1.0 and r.T == 50
    with pytest.raises(ValueError):
        epsilon(f, f, [])


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3).map(sorted),
       st.lists(st.floats(0, 1), min_size=3, max_size=3).map(sorted),
       st.lists(st.floats(0, 1), min_size=3, max_size=3).map(sorted))
@settings(max_examples=200, deadline=None)
def test_epsilon_symmetric_and_triangle(a, b, c):
    bins = np.arange(3)
    fa, fb, fc = (lambda t, v=np.asarray(v): v[t] for v in (a, b, c))
    ab, ba = epsilon(fa, fb, bins).value, epsilon(fb, fa, bins).value
    assert ab == ba
    assert ab <= epsilon(fa, fc, bins).value + epsilon(fc, fb, bins).value + 1e-15


def test_fit_epsilon_uses_bin_centres():
    s = IntervalSeries([1.0, 1.2, 3.0])
    m = dist.LogNormal(0.5, 1.0)
    expected = (abs(m.cdf(1.5) - 2 / 3) + abs(m.cdf(3.5) - 1.0)) / 2
    assert fit_epsilon(m, s).value == pytest.approx(expected, abs=1e-15)


def textbook_ks(x, cdf):
    x = np.sort(x)
    n = x.size
    return max(max((i + 1) / n - cdf(v), cdf(v) - i / n) for i, v in enumerate(x))


def test_ks_single_point_at_median():
    m = dist.LogNormal(2.0, 1.0)
    assert ks_statistic([math.exp(2.0)], m) == 0.5


def test_ks_quantile_grid():
    m = dist.LogNormal(0.0, 1.0)
    x = m.quantile(np.arange(1, 10) / 10)
    d = ks_statistic(x, m)
    assert d == pytest.approx(textbook_ks(x, m.cdf), abs=1e-14)
    assert d <= 1 / 10 + 1 / 9


def test_ks_matches_textbook_formula(rng):
    m = dist.DoubleLogNormal(4, 1, 0.7, 7, 0.5)
    x = m.sample(300, rng)
    assert ks_statistic(x, m) == pytest.approx(textbook_ks(x, m.cdf), abs=1e-14)


def test_ks_dkw_bound():
    m = dist.LogNormal(5.1, 1.5)
    assert ks_statistic(m.sample(10_000, 99), m) < 0.02


def test_ks_monotone_transform_invariance(rng):
    m = dist.LogNormal(1.0, 0.6)
    x = m.sample(400, rng)
    normal = lambda y: dist.norm_cdf((np.asarray(y) - 1.0) / 0.6)
    assert ks_statistic(x, m) == pytest.approx(ks_statistic(np.log(x), normal), abs=1e-14)


def test_ks_discrete_uses_left_limits():
    m = dist.PowerLaw(2.0, 1)
    x = [1, 1, 2, 5]
    # ECDF steps against the model cdf and its left limit at each support point
    pts = [1, 2, 5]
    upper = {1: 0.5, 2: 0.75, 5: 1.0}
    lower = {1: 0.0, 2: 0.5, 5: 0.75}
    expected = max(max(abs(upper[p] - m.cdf(p)),
                       abs(lower[p] - (m.cdf(p - 1) if p > 1 else 0.0))) for p in pts)
    assert ks_statistic(x, m) == pytest.approx(expected, abs=1e-15)


def test_ks_montecarlo_guards_and_determinism():
    x = dist.LogNormal(3.0, 1.0).sample(200, 1)
    with pytest.raises(ValueError):
        ks_test_montecarlo(x, "ln", n_replicas=0)
    a = ks_test_montecarlo(x, "ln", n_replicas=100, seed=5)
    b = ks_test_montecarlo(x, "ln", n_replicas=100, seed=5)
    c = ks_test_montecarlo(x, "ln", n_replicas=100, seed=5, workers=2)
    assert a == b == c
    assert a.method == BOOTSTRAP_NOTE
    assert 0 <= a.D <= 1 and 0 <= a.p_value <= 1


def test_ks_montecarlo_calibration_for_ln():
    # a calibrated test keeps p > 0.05 in 95% of trials; 90 of 100 is about
    # three binomial standard errors below that
    passed = sum(
        ks_test_montecarlo(dist.LogNormal(5.1, 1.5).sample(200, 1000 + t), "ln",
                           n_replicas=200, seed=t).p_value > 0.05
        for t in range(100))
    assert passed >= 90


def test_ks_montecarlo_rejects_power_law_on_ln_counts():
    x = np.maximum(np.rint(dist.LogNormal(5.1, 1.5).sample(5000, 7)), 1)
    res = ks_test_montecarlo(x, "powerlaw", 1, n_replicas=1000, seed=1)
    assert res.p_value < 0.001


def test_ks_montecarlo_power_law_not_rejected_on_power_law():
    x = dist.PowerLaw(1.8, 1).sample(2000, 17)
    assert ks_test_montecarlo(x, "powerlaw", 1, n_replicas=300, seed=2).p_value > 0.01


def test_ks_montecarlo_requantizes_integer_ln_data():
    x = np.maximum(np.rint(dist.LogNormal(2.0, 1.0).sample(1000, 3)), 0.5)
    res = ks_test_montecarlo(x, "ln", n_replicas=200, seed=3)
    assert res.p_value > 0.01 and res.n_discarded == 0


def test_error_by_publish_hour_absent_hours():
    corpus = make_corpus({"a": 9 * 60, "b": 1440 + 9 * 60 + 30}, [])
    out = error_by_publish_hour(corpus, {"a": 0.01, "b": 0.01})
    assert list(out) == [9]
    assert out[9].mean == pytest.approx(0.01) and out[9].median == pytest.approx(0.01)
    assert out[9].count == 2
    assert hourly_spread(out) == 0.0


def test_publish_hour_shape_with_second_wave():
    spec = sg.GeneratorSpec(
        240, pci={"model": "ln", "mu": 4.5, "sigma": 1.0},
        schedule=sg.Schedule("uniform", hours=(1, 2, 3, 4, 5, 6)),
        comments=sg.CommentCount("fixed", n=150), second_wave=sg.SecondWave(0.5, 4.0, 0.3),
        users=sg.UserPool(size=5000), ici_floor=0, seed=8)
    corpus, _ = sg.generate_corpus(spec)
    ln = error_by_publish_hour(corpus, fit_all_posts(corpus, "ln").reports)
    before = np.mean([ln[h].mean for h in (1, 2, 3)])
    after = np.mean([ln[h].mean for h in (4, 5, 6)])
    assert before > after
    dln = error_by_publish_hour(corpus, fit_all_posts(corpus, "dln").reports)
    assert hourly_spread(dln) < hourly_spread(ln)
