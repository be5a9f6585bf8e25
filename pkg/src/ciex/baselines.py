"""Classical reject-inference baselines.

Weight adjusting: upward (A-UW), downward (A-DW), soft cut-off (A-SC) and
fuzzy (A-FU) augmentation.  Data inflating: extrapolation (full, bad-only,
confident), parceling (PAR) and label spreading (LSP).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierSpec, ProbClassifier
from .data import INFERRED, Dataset, TrainState, concat
from .spreading import SpreadSpec, spread

DEFAULT_CLASSIFIER = ClassifierSpec()
WEIGHT_FLOOR = 1e-6
DEFAULT_BANDS = 10
DEFAULT_PREJUDICE = 2.0
DEFAULT_CONFIDENT_FRACTION = 0.5


class ClippedWeightWarning(UserWarning):
    """A probability or weight was clipped to keep weights positive and bounded."""


class BandMergeWarning(UserWarning):
    """A score band had no accepted rows and borrowed from a neighbour."""


def approval_probability(train: Dataset, rejects: Dataset, classifier: ProbClassifier = DEFAULT_CLASSIFIER):
    """Fit the accept/reject model; return ``p(A)`` for accepts and for rejects."""
    if len(train) == 0 or len(rejects) == 0:
        raise ValueError("both accepted and rejected rows are needed")
    X = np.vstack([train.X, rejects.X])
    status = np.r_[np.ones(len(train)), np.zeros(len(rejects))]
    p = classifier.fit(X, status).predict_proba(X)
    return p[: len(train)], p[len(train):]


def _clip(p, lo, hi, what):
    clipped = np.clip(p, lo, hi)
    if (clipped != p).any():
        warnings.warn(f"{int((clipped != p).sum())} {what} clipped", ClippedWeightWarning, stacklevel=3)
    return clipped


def upward_weights(w, p_accept):
    return w / _clip(np.asarray(p_accept, float), WEIGHT_FLOOR, 1.0, "approval probabilities")


def downward_weights(w, p_accept):
    return _clip(w * (1.0 - np.asarray(p_accept, float)), WEIGHT_FLOOR, np.inf, "weights")


def augment_upward(train: Dataset, rejects: Dataset, classifier: ProbClassifier = DEFAULT_CLASSIFIER) -> Dataset:
    p_acc, _ = approval_probability(train, rejects, classifier)
    return train.with_weights(upward_weights(train.weights, p_acc))


def augment_downward(train: Dataset, rejects: Dataset, classifier: ProbClassifier = DEFAULT_CLASSIFIER) -> Dataset:
    p_acc, _ = approval_probability(train, rejects, classifier)
    return train.with_weights(downward_weights(train.weights, p_acc))


@dataclass(frozen=True)
class Band:
    index: int
    low: float
    high: float
    n_accepted: int
    n_rejected: int
    bad_rate: float = float("nan")


def equal_frequency_bands(scores, n_bands: int) -> np.ndarray:
    """Band index per row: rows sorted by score, cut into near-equal groups."""
    if n_bands < 2:
        raise ValueError("n_bands must be >= 2")
    order = np.argsort(np.asarray(scores, float), kind="stable")
    band = np.empty(len(order), dtype=np.int64)
    for b, chunk in enumerate(np.array_split(order, n_bands)):
        band[chunk] = b
    return band


def _merge_empty(band: np.ndarray, has_accepts) -> np.ndarray:
    """Relabel bands lacking accepted rows onto the nearest band that has some."""
    ids = np.unique(band)
    good = [b for b in ids if has_accepts(b)]
    if not good:
        raise ValueError("no band contains accepted rows")
    mapping = {}
    for b in ids:
        if b in good:
            mapping[b] = b
        else:
            mapping[b] = min(good, key=lambda g: (abs(g - b), g))
    if any(mapping[b] != b for b in ids):
        warnings.warn("bands without accepted rows were merged", BandMergeWarning, stacklevel=3)
    return np.array([mapping[b] for b in band], dtype=np.int64)


def augment_soft_cutoff(
    train: Dataset,
    rejects: Dataset,
    n_bands: int = DEFAULT_BANDS,
    classifier: ProbClassifier = DEFAULT_CLASSIFIER,
) -> Dataset:
    """Accepted weights scaled by ``1/AF`` of their approval-probability band."""
    if len(rejects) == 0:
        return train
    p_acc, p_rej = approval_probability(train, rejects, classifier)
    is_acc = np.r_[np.ones(len(train), bool), np.zeros(len(rejects), bool)]
    band = equal_frequency_bands(np.r_[p_acc, p_rej], n_bands)
    band = _merge_empty(band, lambda b: (is_acc & (band == b)).any())
    factor = np.ones(len(train))
    for b in np.unique(band):
        in_b = band == b
        nA = int((in_b & is_acc).sum())
        nR = int((in_b & ~is_acc).sum())
        factor[in_b[: len(train)]] = (nA + nR) / nA
    return train.with_weights(train.weights * factor)


def flipped_ids(row_ids) -> np.ndarray:
    """Row ids for the second copy of a duplicated reject (bitwise complement)."""
    return ~np.asarray(row_ids, dtype=np.int64)


def augment_fuzzy(train: Dataset, rejects: Dataset, classifier: ProbClassifier = DEFAULT_CLASSIFIER) -> TrainState:
    """Each reject enters twice: as good with weight p(A), as bad with weight 1 - p(A)."""
    _, p_rej = approval_probability(train, rejects, classifier)
    w_good = _clip(p_rej, WEIGHT_FLOOR, np.inf, "weights")
    w_bad = _clip(1.0 - p_rej, WEIGHT_FLOOR, np.inf, "weights")
    n = len(rejects)
    inferred = np.full(n, INFERRED, np.int8)
    good = rejects.replace(labels=np.zeros(n, np.int8), provenance=inferred, weights=w_good)
    bad = rejects.replace(
        labels=np.ones(n, np.int8), provenance=inferred, weights=w_bad, row_ids=flipped_ids(rejects.row_ids)
    )
    accepts = train.with_weights(np.ones(len(train)))
    labeled = concat(accepts, good, bad)
    return TrainState(labeled, rejects.take(np.zeros(0, dtype=np.int64)))


def _merge(train: Dataset, rejects: Dataset, pick, labels) -> TrainState:
    pick = np.asarray(pick, dtype=np.int64)
    chosen = rejects.take(pick).replace(
        labels=np.asarray(labels, np.int8),
        provenance=np.full(len(pick), INFERRED, np.int8),
        weights=np.ones(len(pick)),
    )
    rest = np.setdiff1d(np.arange(len(rejects)), pick)
    return TrainState(concat(train, chosen), rejects.take(rest))


def confident_count(q: float, n: int) -> int:
    return min(n, int(math.floor(q * n + 0.5)))


def extrapolate(
    train: Dataset,
    rejects: Dataset,
    mode: str = "full",
    q: float = DEFAULT_CONFIDENT_FRACTION,
    classifier: ProbClassifier = DEFAULT_CLASSIFIER,
) -> TrainState:
    """Label rejects with an accepts-only classifier at threshold 0.5.

    ``mode`` is ``"full"`` (merge all), ``"bad"`` (merge rejects labeled bad)
    or ``"confident"`` (merge the fraction ``q`` farthest from 0.5).
    """
    model = classifier.fit(train.X, train.labels, train.weights)
    score = model.predict_proba(rejects.X)
    return extrapolate_from_scores(train, rejects, score, mode, q)


def extrapolate_from_scores(train, rejects, score, mode="full", q=DEFAULT_CONFIDENT_FRACTION) -> TrainState:
    score = np.asarray(score, float)
    labels = (score >= 0.5).astype(np.int8)
    if mode == "full":
        pick = np.arange(len(rejects))
    elif mode == "bad":
        pick = np.flatnonzero(labels == 1)
    elif mode == "confident":
        if not 0.0 < q <= 1.0:
            raise ValueError("q must lie in (0, 1]")
        margin = np.abs(score - 0.5)
        pick = np.sort(np.argsort(-margin, kind="stable")[: confident_count(q, len(rejects))])
    else:
        raise ValueError(f"unknown extrapolation mode {mode!r}")
    return _merge(train, rejects, pick, labels[pick])


def parceling(
    train: Dataset,
    rejects: Dataset,
    n_bands: int = DEFAULT_BANDS,
    prejudice: float = DEFAULT_PREJUDICE,
    seed: int = 0,
    classifier: ProbClassifier = DEFAULT_CLASSIFIER,
) -> TrainState:
    """Random reject labels per default-score band at ``min(1, prejudice * bad rate)``."""
    if prejudice < 1:
        raise ValueError("prejudice must be >= 1")
    model = classifier.fit(train.X, train.labels, train.weights)
    s_acc = model.predict_proba(train.X)
    s_rej = model.predict_proba(rejects.X)
    is_acc = np.r_[np.ones(len(train), bool), np.zeros(len(rejects), bool)]
    band = equal_frequency_bands(np.r_[s_acc, s_rej], n_bands)
    band = _merge_empty(band, lambda b: (is_acc & (band == b)).any())
    rej_band = band[len(train):]
    acc_band = band[: len(train)]
    rng = np.random.default_rng(seed)
    labels = np.zeros(len(rejects), np.int8)
    for b in np.unique(rej_band):
        beta = float(train.labels[acc_band == b].mean())
        beta_hat = parcel_bad_rate(beta, prejudice)
        members = np.flatnonzero(rej_band == b)
        labels[members] = rng.random(members.size) < beta_hat
    return _merge(train, rejects, np.arange(len(rejects)), labels)


def parcel_bad_rate(beta: float, prejudice: float) -> float:
    return min(1.0, prejudice * beta)


def parcel_bands(train: Dataset, rejects: Dataset, n_bands: int = DEFAULT_BANDS, classifier=DEFAULT_CLASSIFIER):
    """Per-band summaries used by parceling (for inspection)."""
    model = classifier.fit(train.X, train.labels, train.weights)
    scores = np.r_[model.predict_proba(train.X), model.predict_proba(rejects.X)]
    is_acc = np.r_[np.ones(len(train), bool), np.zeros(len(rejects), bool)]
    band = equal_frequency_bands(scores, n_bands)
    out = []
    for b in np.unique(band):
        in_b = band == b
        acc = in_b[: len(train)]
        out.append(
            Band(
                index=int(b),
                low=float(scores[in_b].min()),
                high=float(scores[in_b].max()),
                n_accepted=int(acc.sum()),
                n_rejected=int((in_b & ~is_acc).sum()),
                bad_rate=float(train.labels[acc].mean()) if acc.any() else float("nan"),
            )
        )
    return out


def lsp_ri(train: Dataset, rejects: Dataset, spec: SpreadSpec | None = None) -> TrainState:
    result = spread(spec or SpreadSpec(), train.X, train.labels, rejects.X)
    return _merge(train, rejects, np.arange(len(rejects)), result.labels)
