"""Simulated accept/reject policy and the seven-way data split.

A weak L1 logistic policy is fitted on a held-out policy slice; every
remaining row whose predicted default probability exceeds ``epsilon`` is
treated as rejected and its label is moved to a sealed store that only
evaluation code reads.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .classifier import ClassifierSpec, FittedClassifier
from .data import ColumnKind, ColumnMeta, Dataset, SplitSpec, from_arrays, split
from .preprocess import PipelineModel, fit_pipeline, transform

DEFAULT_FRACTIONS = (0.60, 0.19, 0.21)
EPSILON_RANGE = (0.30, 0.65)
POLICY_CLASSIFIER = ClassifierSpec(penalty="l1", strength=1.0, balanced=False)


class EmptySubsetError(ValueError):
    """The policy threshold left one of the seven subsets empty."""


@dataclass(frozen=True)
class PolicySpec:
    epsilon: float
    policy_fraction: float = 0.20
    features: tuple[str, ...] | None = None
    classifier: ClassifierSpec = POLICY_CLASSIFIER
    seed: int = 0
    epsilon_range: tuple[float, float] = EPSILON_RANGE

    def __post_init__(self):
        if not 0.0 < self.policy_fraction < 1.0:
            raise ValueError("policy_fraction must lie in (0, 1)")
        lo, hi = self.epsilon_range
        if not lo <= self.epsilon <= hi:
            raise ValueError(f"epsilon {self.epsilon} outside the configured range [{lo}, {hi}]")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))


@dataclass(frozen=True)
class Policy:
    """A fitted policy: feature columns, optional encoder, and the classifier."""

    features: tuple[str, ...]
    model: FittedClassifier
    pipeline: PipelineModel | None = None

    def default_probability(self, ds: Dataset) -> np.ndarray:
        sub = _columns(ds, self.features)
        if self.pipeline is not None:
            sub = transform(self.pipeline, sub)
        return self.model.predict_proba(sub.X)


@dataclass(frozen=True)
class HiddenTruth:
    """Sealed labels of rejected rows, keyed by row id."""

    row_ids: np.ndarray
    labels: np.ndarray

    def labels_for(self, ids) -> np.ndarray:
        order = np.argsort(self.row_ids)
        pos = np.searchsorted(self.row_ids[order], np.asarray(ids, np.int64))
        return self.labels[order][pos]

    def checksum(self) -> str:
        order = np.argsort(self.row_ids)
        h = hashlib.sha256()
        h.update(self.row_ids[order].astype("<i8").tobytes())
        h.update(self.labels[order].astype("i1").tobytes())
        return h.hexdigest()


def _columns(ds: Dataset, names: Sequence[str]) -> Dataset:
    idx = [ds.column_names.index(n) for n in names]
    return ds.with_values([ds.columns[i] for i in idx], ds.values[:, idx])


def fit_policy(policy_set: Dataset, spec: PolicySpec) -> Policy:
    if policy_set.labels is None:
        raise ValueError("the policy set must be labeled")
    names = spec.features or tuple(policy_set.column_names)
    sub = _columns(policy_set, names)
    pipeline = None
    if not sub.is_numeric:
        pipeline = fit_pipeline(sub)
        sub = transform(pipeline, sub)
    model = spec.classifier.fit(sub.X, sub.labels)
    return Policy(tuple(names), model, pipeline)


def apply_policy(policy: Policy, ds: Dataset, epsilon: float):
    """``(accepted, rejected, hidden)``; rows with PD strictly above ``epsilon`` are rejected."""
    pd_ = policy.default_probability(ds)
    rejected = pd_ > epsilon
    rej = ds.take(rejected)
    hidden = HiddenTruth(rej.row_ids.copy(), None if rej.labels is None else rej.labels.copy())
    return ds.take(~rejected), rej.without_labels(), hidden


@dataclass(frozen=True)
class SevenWaySplit:
    policy_set: Dataset
    train_accepts: Dataset
    train_rejects: Dataset
    val_accepts: Dataset
    val_rejects: Dataset
    test_accepts: Dataset
    test_rejects: Dataset
    hidden: HiddenTruth
    policy: Policy
    epsilon: float

    NAMES = (
        "policy_set",
        "train_accepts",
        "train_rejects",
        "val_accepts",
        "val_rejects",
        "test_accepts",
        "test_rejects",
    )

    def subsets(self) -> dict[str, Dataset]:
        return {n: getattr(self, n) for n in self.NAMES}

    def sizes(self) -> dict[str, int]:
        return {n: len(d) for n, d in self.subsets().items()}

    def manifest(self, cell_id: str, seed: int) -> dict:
        return {
            "cell": cell_id,
            "epsilon": self.epsilon,
            "seed": seed,
            "sizes": self.sizes(),
            "hidden_truth_sha256": self.hidden.checksum(),
        }


def make_seven_way(
    ds: Dataset,
    spec: PolicySpec,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    allow_empty: bool = False,
) -> SevenWaySplit:
    """Carve the policy slice, split the rest, and apply the policy to each part."""
    if ds.labels is None:
        raise ValueError("the input population must be labeled")
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3:
        raise ValueError("give train/val/test fractions")
    rest_fraction = 1.0 - spec.policy_fraction
    policy_set, rest = split(ds, SplitSpec(fractions=(spec.policy_fraction, rest_fraction), seed=spec.seed))
    train, val, test = split(rest, SplitSpec(fractions=fr, seed=spec.seed + 1))
    policy = fit_policy(policy_set, spec)

    parts = {}
    hidden_ids, hidden_labels = [], []
    for name, part in (("train", train), ("val", val), ("test", test)):
        acc, rej, hid = apply_policy(policy, part, spec.epsilon)
        parts[f"{name}_accepts"] = acc
        parts[f"{name}_rejects"] = rej
        hidden_ids.append(hid.row_ids)
        hidden_labels.append(hid.labels)
    empty = [n for n, d in parts.items() if len(d) == 0]
    if empty and not allow_empty:
        raise EmptySubsetError(f"epsilon={spec.epsilon} leaves {', '.join(empty)} empty")
    hidden = HiddenTruth(np.concatenate(hidden_ids), np.concatenate(hidden_labels).astype(np.int8))
    return SevenWaySplit(policy_set=policy_set, hidden=hidden, policy=policy, epsilon=spec.epsilon, **parts)


# ----------------------------------------------------------------------------
# A population whose policy default probabilities follow a logit-normal law


def logit_normal_params(shares: dict[float, float]) -> tuple[float, float]:
    """``(mu, s)`` such that ``P(sigmoid(mu + s Z) <= eps) = share`` at two thresholds."""
    if len(shares) != 2:
        raise ValueError("exactly two (threshold, accepted share) pairs are needed")
    (e1, a1), (e2, a2) = sorted(shares.items())
    z1, z2 = norm.ppf(a1), norm.ppf(a2)
    s = (logit(e2) - logit(e1)) / (z2 - z1)
    if not s > 0:
        raise ValueError("accepted shares must increase with the threshold")
    mu = logit(e1) - s * z1
    return float(mu), float(s)


def accepted_share(epsilon: float, mu: float, s: float) -> float:
    return float(norm.cdf((logit(epsilon) - mu) / s))


def policy_population(n: int, mu: float, s: float, seed: int, n_noise: int = 3) -> Dataset:
    """Rows whose default probability is ``sigmoid(mu + s * score)``, ``score ~ N(0, 1)``.

    Columns: ``score`` plus ``n_noise`` irrelevant standard-normal columns.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    y = (rng.random(n) < expit(mu + s * z)).astype(np.int8)
    X = np.column_stack([z, rng.standard_normal((n, n_noise))])
    names = ["score"] + [f"noise{i}" for i in range(n_noise)]
    return from_arrays(X, y, names=names)
