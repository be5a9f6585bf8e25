"""Graph label spreading for the LSP baseline.

Iterates ``F <- alpha * S @ F + (1 - alpha) * Y`` on the symmetrically
normalised affinity matrix ``S = D^-1/2 W D^-1/2`` until the largest entry
change drops below ``tol``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree


class IsolatedNodeWarning(UserWarning):
    """Some unlabeled points received no label mass and fell back to the prior."""


@dataclass(frozen=True)
class SpreadSpec:
    graph: str = "knn"
    k: int = 7
    bandwidth: float = 1.0
    alpha: float = 0.2
    max_iters: int = 1000
    tol: float = 1e-6
    standardize: bool = True

    def __post_init__(self):
        if self.graph not in ("knn", "rbf"):
            raise ValueError("graph must be 'knn' or 'rbf'")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.graph == "knn" and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.graph == "rbf" and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class SpreadResult:
    labels: np.ndarray
    scores: np.ndarray       # (n_unlabeled, 2) soft class scores
    isolated: np.ndarray     # unlabeled rows that fell back to the prior
    n_iter: int
    converged: bool


def affinity(spec: SpreadSpec, X: np.ndarray) -> sparse.csr_matrix:
    n = len(X)
    if spec.graph == "knn":
        k = min(spec.k, n - 1)
        _, nbr = cKDTree(X).query(X, k=k + 1)
        rows, cols = [], []
        for i in range(n):
            # drop self; a duplicate point may be returned before it
            picks = [j for j in nbr[i] if j != i][:k]
            rows.extend([i] * len(picks))
            cols.extend(picks)
        W = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        return W.maximum(W.T).tocsr()
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    W = np.exp(-d2 / (2.0 * spec.bandwidth ** 2))
    np.fill_diagonal(W, 0.0)
    return sparse.csr_matrix(W)


def spread(spec: SpreadSpec, X_labeled, y, X_unlabeled) -> SpreadResult:
    XL = np.asarray(X_labeled, float)
    XU = np.asarray(X_unlabeled, float)
    y = np.asarray(y).astype(int)
    if XL.ndim != 2 or XU.ndim != 2 or XL.shape[1] != XU.shape[1]:
        raise ValueError("labeled and unlabeled matrices must share their column count")
    if not ((y == 0).any() and (y == 1).any()):
        raise ValueError("both classes must be present among the labeled points")
    X = np.vstack([XL, XU])
    if spec.standardize:
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        X = (X - X.mean(axis=0)) / sd

    W = affinity(spec, X)
    deg = np.asarray(W.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    S = sparse.diags(inv) @ W @ sparse.diags(inv)

    nl = len(XL)
    Y = np.zeros((len(X), 2))
    Y[np.arange(nl), y] = 1.0
    F = Y.copy()
    base = (1.0 - spec.alpha) * Y
    converged = False
    it = 0
    for it in range(1, spec.max_iters + 1):
        nxt = spec.alpha * (S @ F) + base
        change = np.abs(nxt - F).max()
        F = nxt
        if change < spec.tol:
            converged = True
            break

    FU = F[nl:]
    labels = (FU[:, 1] > FU[:, 0]).astype(np.int8)
    isolated = FU.sum(axis=1) <= 0
    if isolated.any():
        prior = int(y.mean() > 0.5)
        labels[isolated] = prior
        warnings.warn(
            f"{int(isolated.sum())} unlabeled points reached no labeled point; "
            "assigned the majority label",
            IsolatedNodeWarning,
            stacklevel=2,
        )
    ties = ~isolated & (FU[:, 1] == FU[:, 0])
    labels[ties] = int(y.mean() > 0.5)
    return SpreadResult(labels=labels, scores=FU, isolated=isolated, n_iter=it, converged=converged)
