"""Weighted logistic regression, the reference probabilistic classifier.

The model minimises the weighted negative log-likelihood plus an L1 or L2
penalty on the (internally standardized) coefficients, using accelerated
proximal gradient steps with a fixed step of ``1 / L`` where ``L`` bounds
the curvature of the smooth part.  Everything is deterministic.

Anything with ``fit(X, y, sample_weight) -> model`` and
``model.predict_proba(X) -> P(y=1)`` can stand in for :class:`ClassifierSpec`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np
from scipy.special import expit

FORMAT_VERSION = 1
_Z_CLIP = 36.0


class ConvergenceError(RuntimeError):
    """The optimiser diverged (objective non-finite or rising repeatedly)."""


class FittedModel(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


class ProbClassifier(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray | None = None) -> FittedModel: ...


def class_balance_weights(labels) -> np.ndarray:
    """Per-row weight ``n / (2 n_c)`` so both classes carry equal total weight."""
    y = np.asarray(labels)
    n = y.size
    n1 = int((y == 1).sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("class balancing needs both classes present")
    return np.where(y == 1, n / (2.0 * n1), n / (2.0 * n0))


def weighted_logistic_loss(params, X, y, w, l2: float = 0.0):
    """Weighted NLL (divided by total weight) plus ``l2/2 * |coef|^2``.

    ``params`` is ``[intercept, coef...]``.  Returns ``(loss, gradient)``.
    """
    params = np.asarray(params, float)
    b, beta = params[0], params[1:]
    z = b + X @ beta
    wsum = w.sum()
    # log(1 + e^z) - y z, stable for large |z|
    loss = (w * (np.logaddexp(0.0, z) - y * z)).sum() / wsum + 0.5 * l2 * beta @ beta
    r = w * (expit(z) - y) / wsum
    grad = np.concatenate(([r.sum()], X.T @ r + l2 * beta))
    return loss, grad


@dataclass(frozen=True)
class ClassifierSpec:
    """Settings for the reference logistic classifier.

    ``strength`` multiplies the penalty against the *summed* (not averaged)
    weighted log-likelihood, so it behaves like sklearn's ``1 / C``.
    """

    penalty: str = "l2"
    strength: float = 1.0
    balanced: bool = True
    max_iters: int = 5000
    tol: float = 1e-7
    seed: int = 0
    patience: int = 25

    def __post_init__(self):
        if self.penalty not in ("l1", "l2"):
            raise ValueError("penalty must be 'l1' or 'l2'")
        if self.strength < 0:
            raise ValueError("strength must be non-negative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def fit(self, X, y, sample_weight=None) -> "FittedClassifier":
        return fit(self, X, y, sample_weight)


@dataclass(frozen=True)
class FittedClassifier:
    coef: np.ndarray
    intercept: float
    spec: ClassifierSpec = field(default_factory=ClassifierSpec)
    n_iter: int = 0
    final_loss: float = float("nan")
    converged: bool = True

    @property
    def n_features(self) -> int:
        return self.coef.size

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        if X.ndim != 2 or X.shape[1] != self.coef.size:
            raise ValueError(f"expected {self.coef.size} features, got shape {X.shape}")
        return self.intercept + X @ self.coef

    def predict_proba(self, X) -> np.ndarray:
        return expit(np.clip(self.decision_function(X), -_Z_CLIP, _Z_CLIP))

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": FORMAT_VERSION,
                "kind": "logistic",
                "coef": [float(c) for c in self.coef],
                "intercept": float(self.intercept),
                "spec": asdict(self.spec),
                "diagnostics": {
                    "n_iter": self.n_iter,
                    "final_loss": self.final_loss,
                    "converged": self.converged,
                },
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedClassifier":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        diag = doc["diagnostics"]
        return cls(
            coef=np.asarray(doc["coef"], float),
            intercept=float(doc["intercept"]),
            spec=ClassifierSpec(**doc["spec"]),
            n_iter=int(diag["n_iter"]),
            final_loss=float(diag["final_loss"]),
            converged=bool(diag["converged"]),
        )


def predict_proba(model: FittedModel, X) -> np.ndarray:
    return model.predict_proba(X)


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fit(spec: ClassifierSpec, X, y, sample_weight=None) -> FittedClassifier:
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, float)
    if w.shape != y.shape or not (w > 0).all():
        raise ValueError("sample weights must be positive, one per row")
    if spec.balanced:
        w = w * class_balance_weights(y)

    n, d = X.shape
    mu = (w @ X) / w.sum()
    sd = np.sqrt((w @ (X - mu) ** 2) / w.sum())
    sd[sd == 0] = 1.0
    Xs = (X - mu) / sd

    lam = spec.strength / w.sum()
    l2 = lam if spec.penalty == "l2" else 0.0
    l1 = lam if spec.penalty == "l1" else 0.0

    A = np.hstack([np.ones((n, 1)), Xs])
    curvature = 0.25 * np.linalg.eigvalsh((A * w[:, None]).T @ A / w.sum())[-1] + l2
    step = 1.0 / curvature

    def objective(theta):
        f, g = weighted_logistic_loss(theta, Xs, y, w, l2)
        return f + l1 * np.abs(theta[1:]).sum(), f, g

    theta = np.zeros(d + 1)
    base = np.clip((w * y).sum() / w.sum(), 1e-12, 1 - 1e-12)
    theta[0] = np.log(base / (1 - base))
    obj, _, _ = objective(theta)
    momentum, t = theta, 1.0
    restarted = True
    rises = 0
    converged = False
    it = 0
    for it in range(1, spec.max_iters + 1):
        _, _, g = objective(momentum)
        cand = momentum - step * g
        cand[1:] = _soft_threshold(cand[1:], step * l1)
        cand_obj, _, _ = objective(cand)
        if not np.isfinite(cand_obj):
            raise ConvergenceError(f"objective became non-finite at iteration {it}")
        if cand_obj > obj:
            if restarted:
                # a plain proximal step with step 1/L cannot rise beyond rounding
                # noise, so a tiny rise here means we sit at the optimum
                if np.abs(cand - theta).max() < spec.tol or cand_obj - obj <= 1e-12 * max(1.0, abs(obj)):
                    converged = True
                    break
                rises += 1
                if rises >= spec.patience:
                    raise ConvergenceError(
                        f"objective failed to decrease for {rises} consecutive steps "
                        f"(iteration {it}, objective {obj:.6g})"
                    )
            momentum, t, restarted = theta, 1.0, True
            continue
        rises = 0
        delta = np.abs(cand - theta).max()
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = cand + ((t - 1.0) / t_next) * (cand - theta)
        theta, obj, t, restarted = cand, cand_obj, t_next, False
        if delta < spec.tol:
            converged = True
            break

    coef = theta[1:] / sd
    if spec.penalty == "l1":
        coef[theta[1:] == 0.0] = 0.0
    intercept = theta[0] - coef @ mu
    return FittedClassifier(
        coef=coef,
        intercept=float(intercept),
        spec=spec,
        n_iter=it,
        final_loss=float(obj),
        converged=converged,
    )
