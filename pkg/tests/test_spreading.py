import numpy as np
import pytest
from hypothesis import given, strategies as st

from ciex.spreading import IsolatedNodeWarning, SpreadSpec, affinity, spread


def two_clusters(seed, n=50):
    rng = np.random.default_rng(seed)
    A = rng.normal(-5, 0.7, (n + 1, 2))
    B = rng.normal(5, 0.7, (n + 1, 2))
    XL = np.vstack([A[:1], B[:1]])
    XU = np.vstack([A[1:], B[1:]])
    truth = np.r_[np.zeros(n), np.ones(n)].astype(int)
    return XL, np.array([0, 1]), XU, truth


class TestSpread:
    @pytest.mark.parametrize("graph", ["knn", "rbf"])
    def test_clusters(self, graph):
        XL, y, XU, truth = two_clusters(0)
        res = spread(SpreadSpec(graph=graph, k=7, bandwidth=0.5, alpha=0.9), XL, y, XU)
        np.testing.assert_array_equal(res.labels, truth)
        assert res.converged

    @given(st.integers(0, 10_000))
    def test_small_alpha_is_nearest_labeled(self, seed):
        # s unlabeled points huddle around each labeled anchor; anchors far apart
        rng = np.random.default_rng(seed)
        m, s = int(rng.integers(2, 8)), int(rng.integers(1, 4))
        anchors = np.c_[np.arange(m) * 10.0, rng.normal(size=m)]
        y = rng.integers(0, 2, m)
        y[:2] = [0, 1]
        XU = np.repeat(anchors, s, axis=0) + rng.normal(0, 0.01, (m * s, 2))
        XU = XU[rng.permutation(m * s)]
        res = spread(SpreadSpec(graph="knn", k=s, alpha=1e-3, standardize=False), anchors, y, XU)
        d = ((XU[:, None, :] - anchors[None]) ** 2).sum(-1)
        np.testing.assert_array_equal(res.labels, y[d.argmin(1)])

    def test_duplicate_of_labeled(self):
        XL, y, XU, _ = two_clusters(1)
        res = spread(SpreadSpec(), XL, y, np.vstack([XL[1:], XU]))
        assert res.labels[0] == 1

    def test_isolated_nodes_warn(self):
        XL = np.array([[0.0, 0.0], [0.1, 0.0]])
        XU = np.array([[100.0, 100.0], [100.1, 100.0]])
        with pytest.warns(IsolatedNodeWarning):
            res = spread(SpreadSpec(k=1, standardize=False), XL, np.array([0, 1]), XU)
        assert res.isolated.all()

    def test_deterministic(self):
        XL, y, XU, _ = two_clusters(2)
        a = spread(SpreadSpec(), XL, y, XU)
        b = spread(SpreadSpec(), XL, y, XU)
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_affinity_symmetric(self):
        X = np.random.default_rng(0).normal(size=(30, 3))
        W = affinity(SpreadSpec(k=4), X)
        assert abs(W - W.T).max() == 0
        assert W.diagonal().sum() == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            spread(SpreadSpec(), np.zeros((2, 2)), np.array([0, 0]), np.zeros((3, 2)))
        with pytest.raises(ValueError):
            spread(SpreadSpec(), np.zeros((2, 2)), np.array([0, 1]), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            SpreadSpec(alpha=1.0)
        with pytest.raises(ValueError):
            SpreadSpec(graph="full")
