import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dm_oracle, interval_score_loop, mme_loop
from intradayfts.errors import DegenerateLossDifferential, InvertedInterval, ShapeMismatch
from intradayfts.metrics import (
    dm_test,
    interval_score,
    mcpdc,
    mean_interval_score,
    mme,
    pointwise_errors,
    summarize,
    write_json,
    write_metric_csv,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_pointwise_examples():
    a = np.random.default_rng(0).normal(size=(4, 3))
    s = pointwise_errors(a, a)
    assert np.all(s.mafe == 0) and np.all(s.msfe == 0) and s.q == 4
    s = pointwise_errors(a, a + 2)
    np.testing.assert_allclose(s.mafe, 2)
    np.testing.assert_allclose(s.msfe, 4)
    s = pointwise_errors([[0.0], [0.0]], [[1.0], [-1.0]])
    assert s.mafe[0] == 1 and s.msfe[0] == 1


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        pointwise_errors(np.zeros((2, 3)), np.zeros((3, 2)))
    for fn in (mme, mcpdc):
        with pytest.raises(ShapeMismatch):
            fn(np.zeros((2, 3)), np.zeros((2, 4)))


def test_mme_examples():
    actual = np.zeros((5, 2))
    u, o = mme(actual, actual)
    assert np.all(u == 0) and np.all(o == 0)
    u, o = mme(actual, actual + 0.25)
    np.testing.assert_array_equal(u, 0.25)
    np.testing.assert_array_equal(o, 0.5)
    u, o = mme(actual, actual - 0.25)
    np.testing.assert_array_equal(u, 0.5)
    np.testing.assert_array_equal(o, 0.25)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 3), elements=finite), arrays(np.float64, (4, 3), elements=finite))
def test_mme_matches_loop(a, f):
    u, o = mme(a, f)
    ru, ro = mme_loop(a, f)
    np.testing.assert_allclose(u, ru, atol=1e-12)
    np.testing.assert_allclose(o, ro, atol=1e-12)


def test_mcpdc_examples():
    a = np.array([[1.0], [2.0], [-1.0], [-3.0]])
    assert mcpdc(a, 5 * a)[0] == 100.0
    assert mcpdc(a, -a)[0] == 0.0
    assert mcpdc(a, np.array([[1.0], [-1.0], [-1.0], [1.0]]))[0] == 50.0
    assert mcpdc([[0.0], [0.0]], [[0.0], [1.0]])[0] == 50.0


def test_interval_score_examples():
    assert interval_score(0.0, 2.0, 1.0) == 2.0
    assert interval_score(0.0, 1.0, 1.5, 0.2) == 6.0
    assert interval_score(3.0, 3.0, 3.0) == 0.0
    with pytest.raises(InvertedInterval):
        interval_score(1.0, 0.0, 0.5)


@settings(max_examples=100, deadline=None)
@given(finite, st.floats(0, 20), finite, st.floats(0.01, 0.99))
def test_interval_score_matches_loop_and_is_positive_outside(lo, w, x, alpha):
    hi = lo + w
    s = interval_score(lo, hi, x, alpha)
    assert s == pytest.approx(interval_score_loop(lo, hi, x, alpha), abs=1e-9)
    if x < lo or x > hi:
        assert s > 0
    assert s >= interval_score(x, x, x, alpha) == 0


def test_mean_interval_score_averages_days():
    lo = np.zeros((2, 2))
    hi = np.ones((2, 2))
    x = np.array([[0.5, 1.5], [0.5, 0.5]])
    np.testing.assert_allclose(mean_interval_score(lo, hi, x, 0.2), [1.0, 3.5])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=finite), arrays(np.float64, (5, 3), elements=finite),
       st.permutations(range(5)))
def test_invariants(a, f, perm):
    s = pointwise_errors(a, f)
    assert np.all(s.mafe >= 0) and np.all(s.msfe >= s.mafe**2 - 1e-9)
    c = mcpdc(a, f)
    assert np.all((0 <= c) & (c <= 100))
    p = list(perm)
    np.testing.assert_allclose(pointwise_errors(a[p], f[p]).msfe, s.msfe)
    np.testing.assert_allclose(mme(a[p], f[p])[0], mme(a, f)[0])


def test_dm_degenerate_and_short():
    x = np.arange(20.0)
    with pytest.raises(DegenerateLossDifferential):
        dm_test(x, x)
    with pytest.raises(ShapeMismatch):
        dm_test(x[:9], x[:9] + 1)
    with pytest.raises(ShapeMismatch):
        dm_test(x, x[:15])


def test_dm_detects_uniformly_better_method():
    rng = np.random.default_rng(123)
    b = rng.normal(5, 1, 1000)
    a = b - 1 + 0.1 * rng.normal(size=1000)
    stat, p = dm_test(a, b, "a_less")
    assert stat < -10 and p < 1e-6


def test_dm_against_oracle_and_antisymmetry():
    rng = np.random.default_rng(9)
    a, b = rng.random(40), rng.random(40)
    stat, p = dm_test(a, b, "a_less")
    ref_stat, ref_p = dm_oracle(a, b)
    assert stat == pytest.approx(ref_stat, rel=1e-12)
    assert p == pytest.approx(ref_p, rel=1e-9)
    assert dm_test(b, a)[0] == -stat
    s2, p2 = dm_test(a, b)
    assert 0 < p2 < 1 and p2 == pytest.approx(2 * min(p, 1 - p), rel=1e-9)
    with pytest.raises(ValueError):
        dm_test(a, b, "greater")


def test_summary_and_writers(tmp_path):
    assert summarize([3.0, 1.0, np.nan, 2.0]) == {"min": 1.0, "median": 2.0, "mean": 2.0, "max": 3.0}
    assert summarize([np.nan])["mean"] is None
    path = tmp_path / "m.csv"
    write_metric_csv(path, [2, 3], {"TS_MAFE": np.array([0.5, 0.25])})
    assert path.read_text() == "grid_index,TS_MAFE\n2,0.5\n3,0.25\n"
    jpath = tmp_path / "s.json"
    write_json(jpath, {"b": 1, "a": [1.5]})
    assert json.loads(jpath.read_text()) == {"a": [1.5], "b": 1}
    assert jpath.read_text().index('"a"') < jpath.read_text().index('"b"')
