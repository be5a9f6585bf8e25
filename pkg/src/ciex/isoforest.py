"""Isolation Forest, written from scratch on numpy.

Trees are stored as flat node arrays so scoring is a vectorised walk
down at most ``ceil(log2(subsample_size))`` levels per tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

EULER_GAMMA = 0.5772156649015329


def harmonic(i):
    """Exact harmonic number ``H(i) = 1 + 1/2 + ... + 1/i`` (vectorised, ``H(0) = 0``)."""
    i = np.asarray(i, dtype=float)
    return digamma(i + 1.0) + EULER_GAMMA


def c_factor(n, approximate_harmonic: bool = False):
    """Average unsuccessful-search path length in a BST of ``n`` points.

    ``c(n) = 2 H(n-1) - 2 (n-1) / n``.  With ``approximate_harmonic`` the
    harmonic number is replaced by ``ln(i) + gamma``, the textbook shortcut.
    """
    arr = np.asarray(n, dtype=float)
    if (arr < 2).any():
        raise ValueError("c_factor is defined for n >= 2")
    h = np.log(arr - 1.0) + EULER_GAMMA if approximate_harmonic else harmonic(arr - 1.0)
    out = 2.0 * h - 2.0 * (arr - 1.0) / arr
    return float(out) if out.ndim == 0 else out


def _leaf_adjust(sizes: np.ndarray) -> np.ndarray:
    out = np.zeros(sizes.shape)
    big = sizes >= 2
    if big.any():
        out[big] = c_factor(sizes[big])
    return out


@dataclass(frozen=True)
class IsoForestSpec:
    n_trees: int = 100
    subsample_size: int = 256
    contamination: float = 0.12
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.contamination <= 0.5:
            raise ValueError("contamination must lie in (0, 0.5]")
        if self.subsample_size < 2:
            raise ValueError("subsample_size must be >= 2")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


@dataclass(frozen=True)
class IsoTree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray  # depth + c(size) at leaves
    depth: int


def _grow(X: np.ndarray, rng: np.random.Generator, limit: int) -> IsoTree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            lst.append(v)
        return len(feature) - 1

    max_depth = 0
    stack = [(new_node(), np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        max_depth = max(max_depth, depth)
        if len(idx) <= 1 or depth >= limit:
            value[node] = depth + (c_factor(len(idx)) if len(idx) >= 2 else 0.0)
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        varying = np.flatnonzero(hi > lo)
        if varying.size == 0:
            value[node] = depth + c_factor(len(idx))
            continue
        q = varying[rng.integers(varying.size)]
        p = rng.uniform(lo[q], hi[q])
        if p <= lo[q]:
            p = np.nextafter(lo[q], hi[q])
        go_left = sub[:, q] < p
        feature[node], threshold[node] = int(q), float(p)
        l, r = new_node(), new_node()
        left[node], right[node] = l, r
        stack.append((r, idx[~go_left], depth + 1))
        stack.append((l, idx[go_left], depth + 1))
    return IsoTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_value=np.array(value),
        depth=max_depth,
    )


def _path_lengths(tree: IsoTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int64)
    rows = np.arange(len(X))
    for _ in range(tree.depth):
        f = tree.feature[node]
        inner = f >= 0
        if not inner.any():
            break
        r, n = rows[inner], node[inner]
        goes_left = X[r, f[inner]] < tree.threshold[n]
        node[inner] = np.where(goes_left, tree.left[n], tree.right[n])
    return tree.leaf_value[node]


@dataclass(frozen=True)
class IsoForest:
    trees: tuple[IsoTree, ...]
    n_features: int
    subsample_size: int
    threshold: float
    degenerate: bool
    spec: IsoForestSpec

    @property
    def depth_limit(self) -> int:
        return int(math.ceil(math.log2(self.subsample_size)))

    def mean_path_length(self, X) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(len(X))
        for t in self.trees:
            total += _path_lengths(t, X)
        return total / len(self.trees)

    def score(self, X) -> np.ndarray:
        return score_from_path(self.mean_path_length(X), self.subsample_size)

    def is_inlier(self, X) -> np.ndarray:
        return self.score(X) <= self.threshold

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X


def score_from_path(mean_path, n: int) -> np.ndarray:
    """Anomaly score ``2 ** (-E[h] / c(n))``."""
    return np.power(2.0, -np.asarray(mean_path, float) / c_factor(n))


def outlier_count(n_rows: int, contamination: float) -> int:
    return min(n_rows, int(math.ceil(contamination * n_rows - 1e-9)))


def fit(spec: IsoForestSpec, X) -> IsoForest:
    X = np.asarray(X, float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("isolation forest needs a 2-D matrix with at least 2 rows")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    psi = min(spec.subsample_size, len(X))
    limit = int(math.ceil(math.log2(psi)))
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_trees)
    trees = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        sample = rng.choice(len(X), size=psi, replace=False)
        trees.append(_grow(X[sample], rng, limit))
    degenerate = bool((X == X[0]).all())
    forest = IsoForest(
        trees=tuple(trees),
        n_features=X.shape[1],
        subsample_size=psi,
        threshold=np.inf,
        degenerate=degenerate,
        spec=spec,
    )
    scores = forest.score(X)
    k = outlier_count(len(X), spec.contamination)
    ranked = np.sort(scores)[::-1]
    threshold = float(ranked[k]) if k < len(X) else float(ranked[-1])
    if degenerate:
        threshold = float(ranked[0])
    return IsoForest(
        trees=forest.trees,
        n_features=forest.n_features,
        subsample_size=psi,
        threshold=threshold,
        degenerate=degenerate,
        spec=spec,
    )


def anomaly_score(model: IsoForest, X) -> np.ndarray:
    return model.score(np.atleast_2d(X))


def is_inlier(model: IsoForest, X) -> np.ndarray:
    return model.is_inlier(X)
