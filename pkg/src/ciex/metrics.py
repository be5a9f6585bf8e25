"""AUC, kickout and Area Under the Kickout (AUK).

Scores are default probabilities throughout: a lender accepts the rows
with the *lowest* scores.  Kicked-out rows are counted only among the
accepted test rows, the only ones with known outcomes.

Two threshold conventions are supported.  ``"shared"`` (default) sets both
models' thresholds on the accepted and rejected test rows together, so a
model identical to its benchmark always has kickout 0.  ``"separate"`` sets
the benchmark's threshold on the accepted test rows alone and the RI
model's on both pools.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

AUK_GRID = np.round(np.arange(1, 101) / 100.0, 2)


def auc(scores, labels) -> float:
    """P(score of a random positive > score of a random negative), ties count 1/2."""
    s = np.asarray(scores, float)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n1 = int((y == 1).sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    # average 1-based rank over each run of tied scores
    starts = np.flatnonzero(np.r_[True, ss[1:] != ss[:-1]])
    ends = np.r_[starts[1:], ss.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(ss.size)
    ranks[order] = np.repeat(avg, ends - starts)
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def accept_count(alpha: float, n: int) -> int:
    return int(math.floor(alpha * n + 1e-9))


@dataclass(frozen=True)
class KickoutInputs:
    """Scores aligned to row ids.

    ``bm_scores`` and ``ri_accepted_scores`` both cover the accepted test
    rows (``accepted_ids``, ``labels``); ``ri_rejected_scores`` and
    ``bm_rejected_scores`` cover the rejected test rows (``rejected_ids``).
    ``bm_rejected_scores`` is needed only for the shared threshold.
    """

    bm_scores: np.ndarray
    ri_accepted_scores: np.ndarray
    ri_rejected_scores: np.ndarray
    labels: np.ndarray
    accepted_ids: np.ndarray | None = None
    rejected_ids: np.ndarray | None = None
    bm_rejected_scores: np.ndarray | None = None
    threshold: str = "shared"

    def __post_init__(self):
        n_acc = len(self.labels)
        for name in ("bm_scores", "ri_accepted_scores", "labels"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        object.__setattr__(self, "ri_rejected_scores", np.asarray(self.ri_rejected_scores, float))
        if self.threshold not in ("shared", "separate"):
            raise ValueError("threshold must be 'shared' or 'separate'")
        if self.threshold == "shared":
            if self.bm_rejected_scores is None and len(self.ri_rejected_scores) == 0:
                object.__setattr__(self, "bm_rejected_scores", np.zeros(0))
            if self.bm_rejected_scores is None:
                raise ValueError("the shared threshold needs benchmark scores for the rejected rows")
            bm_rej = np.asarray(self.bm_rejected_scores, float)
            if len(bm_rej) != len(self.ri_rejected_scores):
                raise ValueError("rejected-test score vectors differ in length")
            object.__setattr__(self, "bm_rejected_scores", bm_rej)
        if len(self.bm_scores) != n_acc or len(self.ri_accepted_scores) != n_acc:
            raise ValueError("accepted-test score vectors must match the labels")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        acc = np.arange(n_acc) if self.accepted_ids is None else np.asarray(self.accepted_ids)
        rej = (
            np.arange(n_acc, n_acc + len(self.ri_rejected_scores))
            if self.rejected_ids is None
            else np.asarray(self.rejected_ids)
        )
        if len(acc) != n_acc or len(rej) != len(self.ri_rejected_scores):
            raise ValueError("row id vectors must match their score vectors")
        if np.unique(np.r_[acc, rej]).size != n_acc + len(rej):
            raise ValueError("row ids must be unique across accepted and rejected rows")
        object.__setattr__(self, "accepted_ids", acc)
        object.__setattr__(self, "rejected_ids", rej)

    @property
    def n_accepted(self) -> int:
        return len(self.labels)

    @property
    def n_total(self) -> int:
        return len(self.labels) + len(self.ri_rejected_scores)


def inputs_from_models(bm, ri, accepted, rejected, threshold: str = "shared") -> KickoutInputs:
    """Score labeled ``accepted`` and unlabeled ``rejected`` datasets with both models."""
    return KickoutInputs(
        bm_scores=bm.predict_proba(accepted.X),
        ri_accepted_scores=ri.predict_proba(accepted.X),
        ri_rejected_scores=ri.predict_proba(rejected.X),
        labels=accepted.labels,
        accepted_ids=accepted.row_ids,
        rejected_ids=rejected.row_ids,
        bm_rejected_scores=bm.predict_proba(rejected.X),
        threshold=threshold,
    )


@dataclass(frozen=True)
class KickoutParts:
    S_B: int
    K_B: int
    K_G: int
    p_bad: float
    n_accepted_bm: int


@dataclass(frozen=True)
class Kickout:
    value: float
    parts: KickoutParts
    degenerate: bool


class _Ranked:
    """Sort orders shared by every acceptance rate of one KickoutInputs."""

    def __init__(self, inp: KickoutInputs):
        self.inp = inp
        n_acc = inp.n_accepted
        ids = np.r_[inp.accepted_ids, inp.rejected_ids]
        self.ri_order = np.lexsort((ids, np.r_[inp.ri_accepted_scores.astype(float), inp.ri_rejected_scores]))
        pos = np.empty(len(ids), dtype=np.int64)
        pos[self.ri_order] = np.arange(len(ids))
        self.ri_position = pos  # rank of each row under the RI model, accepted rows first
        if inp.threshold == "shared":
            bm = np.r_[inp.bm_scores.astype(float), inp.bm_rejected_scores]
            self.bm_order = np.lexsort((ids, bm))
        else:
            self.bm_order = np.lexsort((inp.accepted_ids, inp.bm_scores))
        self.bm_pool = len(self.bm_order)

    def sets(self, alpha: float):
        """Positions (accepted rows first) accepted by BM, by RI, and the RI count."""
        inp = self.inp
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        n_bm = accept_count(alpha, self.bm_pool)
        if n_bm < 1:
            raise ValueError(f"alpha={alpha} accepts no rows out of {self.bm_pool}")
        n_ri = accept_count(alpha, inp.n_total)
        return self.bm_order[:n_bm], self.ri_order[:n_ri], n_ri

    def kickout(self, alpha: float) -> Kickout:
        bm_acc, _, n_ri = self.sets(alpha)
        bm_acc = bm_acc[bm_acc < self.inp.n_accepted]  # outcomes known only here
        y = self.inp.labels[bm_acc]
        kicked = self.ri_position[bm_acc] >= n_ri
        S_B = int((y == 1).sum())
        K_B = int(((y == 1) & kicked).sum())
        K_G = int(((y == 0) & kicked).sum())
        n_bm = len(bm_acc)
        p = S_B / n_bm if n_bm else 0.0
        parts = KickoutParts(S_B=S_B, K_B=K_B, K_G=K_G, p_bad=p, n_accepted_bm=n_bm)
        if S_B == 0 or p <= 0.0 or p >= 1.0:
            return Kickout(0.0, parts, True)
        return Kickout(kickout_formula(K_B, K_G, S_B, p), parts, False)


def kickout_formula(K_B: int, K_G: int, S_B: int, p_bad: float) -> float:
    return (K_B / p_bad - K_G / (1.0 - p_bad)) / (S_B / p_bad)


def accept_sets(inputs: KickoutInputs, alpha: float):
    """Row ids accepted by the benchmark and by the RI model at rate ``alpha``."""
    r = _Ranked(inputs)
    bm_acc, ri_acc, _ = r.sets(alpha)
    all_ids = np.r_[inputs.accepted_ids, inputs.rejected_ids]
    return all_ids[bm_acc], all_ids[ri_acc]


def kickout_details(inputs: KickoutInputs, alpha: float) -> Kickout:
    return _Ranked(inputs).kickout(alpha)


def kickout(inputs: KickoutInputs, alpha: float) -> float:
    return kickout_details(inputs, alpha).value


@dataclass(frozen=True)
class AUKResult:
    value: float
    alphas: np.ndarray
    kickouts: np.ndarray
    degenerate: np.ndarray


def auk_details(inputs: KickoutInputs, alphas=AUK_GRID) -> AUKResult:
    alphas = np.asarray(alphas, float)
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    r = _Ranked(inputs)
    values = np.zeros(alphas.size)
    degenerate = np.zeros(alphas.size, dtype=bool)
    for i, a in enumerate(sorted(alphas)):
        if accept_count(a, r.bm_pool) < 1:
            degenerate[i] = True
            continue
        k = r.kickout(a)
        values[i], degenerate[i] = k.value, k.degenerate
    return AUKResult(float(values.mean()), np.sort(alphas), values, degenerate)


def auk(inputs: KickoutInputs, alphas=AUK_GRID) -> float:
    return auk_details(inputs, alphas).value
