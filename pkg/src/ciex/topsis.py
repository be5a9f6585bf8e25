"""TOPSIS ranking used to pick one iteration of an iterative RI run."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TopsisResult:
    winner: object
    winner_index: int
    closeness: np.ndarray


def topsis(matrix, weights, benefit=None) -> np.ndarray:
    """Closeness to the ideal point for every row of ``matrix``.

    Columns are vector-normalised, weights normalised to sum to one.
    ``benefit[j]`` is True when larger values of criterion ``j`` are better.
    """
    M = np.asarray(matrix, float)
    w = np.asarray(weights, float)
    if M.ndim != 2 or M.shape[1] != w.size:
        raise ValueError("one weight per criterion column is required")
    if (w <= 0).any():
        raise ValueError("weights must be positive")
    benefit = np.ones(w.size, bool) if benefit is None else np.asarray(benefit, bool)
    norms = np.sqrt((M ** 2).sum(axis=0))
    norms[norms == 0] = 1.0
    V = M / norms * (w / w.sum())
    ideal = np.where(benefit, V.max(axis=0), V.min(axis=0))
    anti = np.where(benefit, V.min(axis=0), V.max(axis=0))
    d_pos = np.sqrt(((V - ideal) ** 2).sum(axis=1))
    d_neg = np.sqrt(((V - anti) ** 2).sum(axis=1))
    total = d_pos + d_neg
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, d_neg / total, 0.0)


def topsis_select(alternatives, weights, benefit=None) -> TopsisResult:
    """Pick the alternative with the highest closeness.

    ``alternatives`` is a sequence of ``(id, criteria)`` pairs.  Ties (up to
    1e-12) go to the earliest alternative.
    """
    alternatives = list(alternatives)
    if len(alternatives) < 2:
        raise ValueError("TOPSIS needs at least two alternatives")
    ids = [a[0] for a in alternatives]
    M = np.array([list(a[1]) for a in alternatives], dtype=float)
    if not np.isfinite(M).all():
        raise ValueError("criterion values must be finite")
    if (M == M[0]).all():
        raise ValueError("all alternatives are identical; nothing to choose between")
    cc = topsis(M, weights, benefit)
    # closeness values within rounding noise of the best count as ties
    best = int(np.flatnonzero(cc >= cc.max() - 1e-12)[0])
    return TopsisResult(winner=ids[best], winner_index=best, closeness=cc)
