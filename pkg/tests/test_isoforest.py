import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ciex import isoforest
from ciex.isoforest import IsoForestSpec, c_factor, outlier_count, score_from_path
from oracles import c_oracle


def cluster_with_outlier(seed, n=500, dim=2):
    """Standard normal cluster plus one point 10 sigma from its centre, along the diagonal."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    far = np.full((1, dim), 10.0 / np.sqrt(dim))
    return np.vstack([X, far])


class TestCFactor:
    def test_matches_harmonic_oracle(self):
        n = np.arange(2, 1025)
        got = c_factor(n)
        want = np.array([c_oracle(int(i)) for i in n])
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-6)

    def test_approximate_mode(self):
        assert c_factor(2, approximate_harmonic=True) == pytest.approx(2 * (math.log(1) + 0.5772156649) - 1, abs=1e-9)
        assert c_factor(2, approximate_harmonic=True) == pytest.approx(0.1544, abs=1e-4)
        assert c_factor(256, approximate_harmonic=True) == pytest.approx(10.24, abs=0.01)
        assert c_factor(256) == pytest.approx(10.24, abs=0.01)

    def test_strictly_increasing(self):
        c = c_factor(np.arange(2, 2000))
        assert (np.diff(c) > 0).all()

    def test_undefined_below_two(self):
        with pytest.raises(ValueError):
            c_factor(1)


class TestScore:
    def test_half_at_expected_path(self):
        assert score_from_path(c_factor(256), 256) == pytest.approx(0.5)

    @given(st.lists(st.integers(0, 4000), min_size=2, max_size=30, unique=True))
    def test_decreasing_and_bounded(self, steps):
        p = np.sort(steps) / 100.0
        s = score_from_path(p, 256)
        assert ((s > 0) & (s <= 1)).all()
        assert (np.diff(s) < 0).all()


class TestForest:
    def test_outlier_gets_max_score(self):
        hits = 0
        for seed in range(20):
            X = cluster_with_outlier(seed)
            model = isoforest.fit(IsoForestSpec(seed=seed), X)
            s = model.score(X)
            hits += int(np.argmax(s) == len(X) - 1)
        assert hits >= 19

    def test_contamination_fraction(self):
        X = np.random.default_rng(3).standard_normal((1000, 3))
        model = isoforest.fit(IsoForestSpec(contamination=0.12, seed=1), X)
        flagged = (~model.is_inlier(X)).sum()
        assert flagged == outlier_count(1000, 0.12) == 120

    def test_median_row_is_inlier(self):
        X = np.random.default_rng(4).standard_normal((400, 2))
        model = isoforest.fit(IsoForestSpec(seed=2), X)
        s = model.score(X)
        median_row = np.argsort(s)[len(s) // 2]
        assert model.is_inlier(X[median_row:median_row + 1])[0]

    def test_depth_limit(self):
        X = np.random.default_rng(5).standard_normal((600, 4))
        model = isoforest.fit(IsoForestSpec(subsample_size=64, n_trees=30), X)
        assert model.depth_limit == 6
        assert all(t.depth <= 6 for t in model.trees)

    def test_deterministic(self):
        X = cluster_with_outlier(7)
        a = isoforest.fit(IsoForestSpec(seed=9), X)
        b = isoforest.fit(IsoForestSpec(seed=9), X)
        assert a.threshold == b.threshold
        for ta, tb in zip(a.trees, b.trees):
            np.testing.assert_array_equal(ta.threshold, tb.threshold)
            np.testing.assert_array_equal(ta.feature, tb.feature)
        np.testing.assert_array_equal(a.score(X), b.score(X))

    def test_small_training_set(self):
        X = np.random.default_rng(0).standard_normal((10, 2))
        model = isoforest.fit(IsoForestSpec(), X)
        assert model.subsample_size == 10
        assert model.is_inlier(X).sum() == 10 - outlier_count(10, 0.12)

    def test_constant_data_all_inliers(self):
        X = np.ones((50, 2))
        model = isoforest.fit(IsoForestSpec(), X)
        assert model.degenerate
        assert model.is_inlier(X).all()

    @pytest.mark.parametrize("kw", [{"contamination": 0.0}, {"contamination": 0.6}, {"subsample_size": 1}, {"n_trees": 0}])
    def test_bad_spec(self, kw):
        with pytest.raises(ValueError):
            IsoForestSpec(**kw)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            isoforest.fit(IsoForestSpec(), np.array([[1.0, np.nan], [0.0, 1.0]]))
        model = isoforest.fit(IsoForestSpec(), np.random.default_rng(0).random((20, 2)))
        with pytest.raises(ValueError):
            model.score(np.zeros((3, 5)))
