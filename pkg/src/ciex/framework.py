"""Confident Inlier Extrapolation (CI-EX).

Each iteration retrieves rejects that are both inliers of the accepted
rows of a class (isolation forest) and among the most confidently scored
for that class, labels them by the classifier and moves them into the
labeled pool.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import isoforest
from .classifier import ClassifierSpec, FittedClassifier
from .data import GROUND_TRUTH, INFERRED, Dataset, TrainState, concat
from .isoforest import IsoForestSpec
from .metrics import AUK_GRID, auc, auk_details, inputs_from_models, kickout_details
from .topsis import topsis_select

__all__ = [
    "CiexSpec",
    "TrainState",
    "Retrieval",
    "IterationRecord",
    "CiexRun",
    "StallError",
    "split_counts",
    "retrieve_confident",
    "expand_dataset",
    "run_ciex",
    "select_iteration",
]


class StallError(RuntimeError):
    """The first CI-EX iteration could not add a single row."""


@dataclass(frozen=True)
class CiexSpec:
    eta: int = 1000
    bad_fraction: float = 0.07
    contamination: float = 0.12
    max_iterations: int = 50
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    forest: IsoForestSpec = field(default_factory=IsoForestSpec)
    seed: int = 0

    def __post_init__(self):
        if self.eta < 1:
            raise ValueError("eta must be >= 1")
        if not 0.0 < self.bad_fraction < 1.0:
            raise ValueError("bad_fraction must lie in (0, 1)")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.forest.contamination != self.contamination:
            object.__setattr__(self, "forest", dataclasses.replace(self.forest, contamination=self.contamination))

    @property
    def counts(self) -> tuple[int, int]:
        return split_counts(self.eta, self.bad_fraction)

    def forest_for(self, iteration: int, delta: int) -> IsoForestSpec:
        seq = np.random.SeedSequence([self.seed, iteration, delta])
        return dataclasses.replace(self.forest, seed=int(seq.generate_state(1)[0]))


def split_counts(eta: int, rho: float) -> tuple[int, int]:
    """``(c0, c1)`` with ``c1 = round(eta * rho)`` half away from zero."""
    c1 = int(math.floor(eta * rho + 0.5))
    return eta - c1, c1


@dataclass(frozen=True)
class Retrieval:
    row_ids: np.ndarray       # selected rows in selection order
    labels: np.ndarray        # inferred labels, 1{score >= 0.5}
    confidence: np.ndarray    # P(class = delta) of each selected row
    inlier: np.ndarray        # forest verdict of each selected row (always True)
    delta: int
    n_examined: int
    cross_labeled: int        # selected rows whose label differs from delta
    rejects: Dataset          # reject pool with the selection removed

    def __len__(self) -> int:
        return len(self.row_ids)


def _scan(confidence: np.ndarray, inlier: np.ndarray, c: int):
    """Positions picked by the argmax loop, and how many rows it examined."""
    order = np.argsort(-confidence, kind="stable")
    hits = np.flatnonzero(inlier[order])[:c]
    examined = int(hits[-1]) + 1 if len(hits) == c and c > 0 else len(order)
    if c == 0:
        examined = 0
    return order[hits], examined


def retrieve_confident(
    state: TrainState,
    delta: int,
    c: int,
    forest: IsoForestSpec = IsoForestSpec(),
    classifier: ClassifierSpec = ClassifierSpec(),
    model: FittedClassifier | None = None,
) -> Retrieval:
    """Retrieve up to ``c`` confident inlier rejects for class ``delta``.

    Rejects are visited in decreasing order of ``P(class = delta)``; each
    visited reject is selected when the forest fitted on the labeled rows of
    class ``delta`` calls it an inlier.  ``model`` may carry an already
    fitted pool classifier so both classes of one iteration share it.
    """
    if delta not in (0, 1):
        raise ValueError("delta must be 0 or 1")
    if c < 0:
        raise ValueError("c must be >= 0")
    labeled, rejects = state.labeled, state.rejects
    own = labeled.labels == delta
    if own.sum() < 2:
        raise ValueError(f"need at least 2 labeled rows of class {delta}, found {int(own.sum())}")
    if c == 0 or len(rejects) == 0:
        empty = np.zeros(0)
        return Retrieval(
            np.zeros(0, np.int64), empty.astype(np.int8), empty, empty.astype(bool), delta, 0, 0, rejects
        )

    iso = isoforest.fit(forest, labeled.X[own])
    if model is None:
        model = classifier.fit(labeled.X, labeled.labels, labeled.weights)
    score = model.predict_proba(rejects.X)
    confidence = score if delta == 1 else 1.0 - score
    inlier = iso.is_inlier(rejects.X)

    picked, examined = _scan(confidence, inlier, c)
    labels = (score[picked] >= 0.5).astype(np.int8)
    rest = np.ones(len(rejects), bool)
    rest[picked] = False
    return Retrieval(
        row_ids=rejects.row_ids[picked].copy(),
        labels=labels,
        confidence=confidence[picked],
        inlier=inlier[picked],
        delta=delta,
        n_examined=examined,
        cross_labeled=int((labels != delta).sum()),
        rejects=rejects.take(rest),
    )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    added_good: int
    added_bad: int
    labeled_size: int
    reject_size: int
    cross_labeled: int = 0
    val_auc: float = float("nan")
    val_kickout: float = float("nan")
    val_auk: float = float("nan")
    stalled: bool = False

    @property
    def added(self) -> int:
        return self.added_good + self.added_bad

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def expand_dataset(state: TrainState, spec: CiexSpec) -> tuple[TrainState, IterationRecord]:
    """One CI-EX iteration: retrieve for class 0, then class 1, then merge."""
    if len(state.rejects) == 0:
        raise ValueError("reject pool is empty")
    c0, c1 = spec.counts
    it = state.iteration + 1
    model = spec.classifier.fit(state.labeled.X, state.labeled.labels, state.labeled.weights)
    good = retrieve_confident(state, 0, c0, spec.forest_for(it, 0), spec.classifier, model)
    # class 1 sees the pre-iteration labeled pool and the rejects left by class 0
    after_good = TrainState(state.labeled, good.rejects, state.iteration)
    bad = retrieve_confident(after_good, 1, c1, spec.forest_for(it, 1), spec.classifier, model)

    parts = [state.labeled]
    for r in (good, bad):
        if len(r):
            rows = state.rejects.select_ids(r.row_ids)
            parts.append(
                rows.replace(
                    labels=r.labels,
                    provenance=np.full(len(r), INFERRED, np.int8),
                    weights=np.ones(len(r)),
                )
            )
    labeled = concat(*parts)
    new = TrainState(labeled, bad.rejects, it)
    record = IterationRecord(
        iteration=it,
        added_good=len(good),
        added_bad=len(bad),
        labeled_size=len(labeled),
        reject_size=len(bad.rejects),
        cross_labeled=good.cross_labeled + bad.cross_labeled,
        stalled=len(good) + len(bad) == 0,
    )
    return new, record


@dataclass
class CiexRun:
    records: list[IterationRecord]
    states: list[TrainState]
    models: list[FittedClassifier]

    @property
    def benchmark(self) -> FittedClassifier:
        return self.models[0]


def _validation_metrics(bm, model, val_acc: Dataset, val_rej: Dataset, alpha: float, alphas, threshold):
    inputs = inputs_from_models(bm, model, val_acc, val_rej, threshold)
    return (
        auc(inputs.ri_accepted_scores, val_acc.labels),
        kickout_details(inputs, alpha).value,
        auk_details(inputs, alphas).value,
    )


def run_ciex(
    initial: TrainState,
    spec: CiexSpec,
    validation: tuple[Dataset, Dataset],
    alpha: float = 0.5,
    alphas: Sequence[float] = AUK_GRID,
    log_path: str | Path | None = None,
    keep_states: bool = True,
    threshold: str = "shared",
) -> CiexRun:
    """Iterate :func:`expand_dataset`, scoring each model on the validation split.

    Record 0 is the benchmark trained on the initial labeled pool.  Stops when
    the reject pool empties, ``max_iterations`` is reached or an iteration
    adds nothing.
    """
    val_acc, val_rej = validation
    if val_acc.labels is None:
        raise ValueError("validation accepted set must be labeled")
    log = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log = open(log_path, "w", encoding="utf-8")

    def emit(rec):
        records.append(rec)
        if log is not None:
            log.write(json.dumps(rec.to_dict()) + "\n")
            log.flush()

    try:
        bm = spec.classifier.fit(initial.labeled.X, initial.labeled.labels, initial.labeled.weights)
        records: list[IterationRecord] = []
        states = [initial]
        models = [bm]
        a, k, u = _validation_metrics(bm, bm, val_acc, val_rej, alpha, alphas, threshold)
        emit(
            IterationRecord(
                iteration=0,
                added_good=0,
                added_bad=0,
                labeled_size=len(initial.labeled),
                reject_size=len(initial.rejects),
                val_auc=a,
                val_kickout=k,
                val_auk=u,
            )
        )
        state = initial
        while state.iteration < spec.max_iterations and len(state.rejects):
            new, rec = expand_dataset(state, spec)
            if rec.stalled:
                if state.iteration == initial.iteration:
                    raise StallError("the first CI-EX iteration added no rows")
                break
            model = spec.classifier.fit(new.labeled.X, new.labeled.labels, new.labeled.weights)
            a, k, u = _validation_metrics(bm, model, val_acc, val_rej, alpha, alphas, threshold)
            emit(dataclasses.replace(rec, val_auc=a, val_kickout=k, val_auk=u))
            state = new
            models.append(model)
            if keep_states:
                states.append(new)
        if not keep_states and state is not initial:
            states.append(state)
        return CiexRun(records, states, models)
    finally:
        if log is not None:
            log.close()


def select_iteration(
    records: Sequence[IterationRecord],
    weights: tuple[float, float] = (1.0, 10.0),
    criterion: str = "auk",
) -> int:
    """Index of the record TOPSIS prefers on (validation AUC, ``criterion``)."""
    if criterion not in ("auk", "kickout"):
        raise ValueError("criterion must be 'auk' or 'kickout'")
    if len(records) == 1:
        return 0
    key = "val_auk" if criterion == "auk" else "val_kickout"
    alts = [(i, (r.val_auc, getattr(r, key))) for i, r in enumerate(records)]
    try:
        return topsis_select(alts, weights).winner_index
    except ValueError:
        return 0


def inferred_rows(state: TrainState) -> Dataset:
    lab = state.labeled
    return lab.take(lab.provenance != GROUND_TRUTH)
