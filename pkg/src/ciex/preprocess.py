"""Leakage-safe preprocessing: imputation, one-hot and target encoding, kNN imputation.

Every statistic is fitted on the training Dataset only; ``transform`` then
applies those frozen statistics to any other Dataset with the same columns.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import ColumnKind, ColumnMeta, Dataset, missing_mask

DEFAULT_SMOOTHING = 20.0


@dataclass(frozen=True)
class PipelineModel:
    columns: tuple[ColumnMeta, ...]
    means: dict
    modes: dict
    vocab: dict
    target_maps: dict
    prior: float
    smoothing: float

    @property
    def output_columns(self) -> tuple[ColumnMeta, ...]:
        out = []
        for c in self.columns:
            if c.kind is ColumnKind.CATEGORICAL_A:
                out.extend(ColumnMeta(f"{c.name}={v}", ColumnKind.NUMERIC) for v in self.vocab[c.name])
            else:
                out.append(ColumnMeta(c.name, ColumnKind.NUMERIC))
        return tuple(out)


def _mode(values) -> object:
    counts = Counter(v for v in values)
    top = max(counts.values())
    return sorted((str(v), v) for v, c in counts.items() if c == top)[0][1]


def target_encoding(n_c: int, rate_c: float, prior: float, smoothing: float) -> float:
    """Empirical-Bayes shrinkage of a category's positive rate toward ``prior``."""
    return (n_c * rate_c + smoothing * prior) / (n_c + smoothing)


def fit_pipeline(train: Dataset, smoothing: float = DEFAULT_SMOOTHING) -> PipelineModel:
    if train.labels is None:
        raise ValueError("fit_pipeline needs a labeled training set (target encoding)")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    y = train.labels.astype(float)
    prior = float(y.mean()) if len(y) else 0.5
    means, modes, vocab, maps = {}, {}, {}, {}
    for j, c in enumerate(train.columns):
        col = train.values[:, j]
        present = ~missing_mask(col)
        if not present.any():
            raise ValueError(f"column {c.name!r} is entirely missing in the training data")
        if c.kind is ColumnKind.NUMERIC:
            means[c.name] = float(np.mean(col[present].astype(float)))
            continue
        modes[c.name] = _mode(col[present])
        filled = np.where(present, col, modes[c.name])
        if c.kind is ColumnKind.CATEGORICAL_A:
            vocab[c.name] = tuple(sorted(set(col[present].tolist()), key=str))
        else:
            table = {}
            for cat in sorted(set(filled.tolist()), key=str):
                hit = filled == cat
                table[cat] = target_encoding(int(hit.sum()), float(y[hit].mean()), prior, smoothing)
            maps[c.name] = table
    return PipelineModel(
        columns=train.columns,
        means=means,
        modes=modes,
        vocab=vocab,
        target_maps=maps,
        prior=prior,
        smoothing=float(smoothing),
    )


def transform(model: PipelineModel, ds: Dataset) -> Dataset:
    """Numeric, gap-free copy of ``ds`` using only statistics stored in ``model``."""
    names = ds.column_names
    expected = [c.name for c in model.columns]
    unknown = [n for n in names if n not in expected]
    if unknown:
        raise ValueError(f"columns not seen at fit time: {unknown}")
    absent = [n for n in expected if n not in names]
    if absent:
        raise ValueError(f"columns missing at transform time: {absent}")

    blocks = []
    for c in model.columns:
        src = ds.columns[names.index(c.name)]
        if src.kind.is_categorical != c.kind.is_categorical:
            raise ValueError(f"column {c.name!r} changed type between fit and transform")
        col = ds.column(c.name)
        miss = missing_mask(col)
        if c.kind is ColumnKind.NUMERIC:
            blocks.append(np.where(miss, model.means[c.name], col).astype(float)[:, None])
            continue
        filled = np.where(miss, model.modes[c.name], col)
        if c.kind is ColumnKind.CATEGORICAL_A:
            vocab = model.vocab[c.name]
            onehot = np.zeros((len(ds), len(vocab)))
            for k, v in enumerate(vocab):
                onehot[:, k] = filled == v
            blocks.append(onehot)
        else:
            table = model.target_maps[c.name]
            enc = np.array([table.get(v, model.prior) for v in filled], dtype=float)
            blocks.append(enc[:, None])
    values = np.hstack(blocks) if blocks else np.empty((len(ds), 0))
    return ds.with_values(model.output_columns, values)


def fit_transform(train: Dataset, *others: Dataset, smoothing: float = DEFAULT_SMOOTHING):
    """Fit on ``train`` and transform it plus any ``others``."""
    model = fit_pipeline(train, smoothing)
    return (model, transform(model, train), *(transform(model, o) for o in others))


def knn_impute(reference: Dataset, target: Dataset, k: int) -> Dataset:
    """Fill gaps in ``target`` from its ``k`` nearest rows of ``reference``.

    Distances are Euclidean on the numeric columns that are complete in both
    datasets, standardized with reference statistics; zero-variance columns
    are ignored.  Numeric gaps take the neighbour mean, categorical gaps the
    neighbour mode.  Ties at the k-th neighbour go to the lower reference
    row id.  The result has the reference's columns, in reference order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(reference):
        raise ValueError(f"k={k} exceeds the {len(reference)} reference rows")
    ref_miss = missing_mask(reference.values)
    tgt_names = target.column_names
    shared = []
    for j, c in enumerate(reference.columns):
        if c.kind is not ColumnKind.NUMERIC or c.name not in tgt_names:
            continue
        if ref_miss[:, j].any() or target.missing_count(c.name):
            continue
        shared.append(c.name)
    if not shared:
        raise ValueError("reference and target share no complete numeric columns")

    R = np.column_stack([reference.column(n).astype(float) for n in shared])
    T = np.column_stack([target.column(n).astype(float) for n in shared])
    mu, sd = R.mean(axis=0), R.std(axis=0)
    live = sd > 0
    if not live.any():
        raise ValueError("all shared columns are constant in the reference")
    R = (R[:, live] - mu[live]) / sd[live]
    T = (T[:, live] - mu[live]) / sd[live]

    neighbours = nearest_rows(R, T, k, tie_keys=reference.row_ids)

    n = len(target)
    cols, out_cols = [], []
    any_cat = False
    for j, c in enumerate(reference.columns):
        ref_col = reference.values[:, j]
        if c.name in tgt_names:
            cur = target.column(c.name).copy() if target.values.dtype == object else target.column(c.name).astype(object)
        else:
            cur = np.full(n, None, dtype=object)
        gaps = missing_mask(cur)
        for i in np.flatnonzero(gaps):
            pool = ref_col[neighbours[i]]
            if c.kind is ColumnKind.NUMERIC:
                cur[i] = float(np.mean(pool.astype(float)))
            else:
                cur[i] = _mode(pool)
        if c.kind is ColumnKind.NUMERIC:
            cur = np.array([float("nan") if v is None else float(v) for v in cur], dtype=object)
        else:
            any_cat = True
        cols.append(cur)
        out_cols.append(c)
    values = np.column_stack(cols)
    if not any_cat:
        values = values.astype(float)
    return target.with_values(out_cols, values)


def nearest_rows(R: np.ndarray, T: np.ndarray, k: int, tie_keys=None, chunk: int = 64) -> np.ndarray:
    """Indices of the ``k`` nearest rows of ``R`` for each row of ``T``.

    Sorted by (distance, tie key), so the result is exact and deterministic.
    """
    tie_keys = np.arange(len(R)) if tie_keys is None else np.asarray(tie_keys)
    out = np.empty((len(T), k), dtype=np.int64)
    for s in range(0, len(T), chunk):
        t = T[s:s + chunk]
        d = np.sqrt(((t[:, None, :] - R[None, :, :]) ** 2).sum(axis=-1))
        keys = np.broadcast_to(tie_keys, d.shape)
        out[s:s + len(t)] = np.lexsort((keys, d), axis=-1)[:, :k]
    return out
