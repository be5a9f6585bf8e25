"""Tabular datasets, CSV ingestion, seeded splits and a synthetic credit generator.

A :class:`Dataset` is an immutable bundle of a cell matrix plus optional
labels, sample weights, label provenance and dates.  Numeric missing cells
are ``NaN``; categorical missing cells are ``None``.  Row ids are assigned
once (at load or generation time) and travel with the rows through every
split, concatenation and removal.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GROUND_TRUTH = 0
INFERRED = 1

# A categorical column with fewer distinct values than this is one-hot encoded.
ONE_HOT_MAX_CARDINALITY = 3


class SchemaError(ValueError):
    """Raised when a CSV file does not agree with its schema."""


class EmptySplitWarning(UserWarning):
    """A split produced an empty partition."""


class ColumnKind(str, enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL_A = "categorical_a"
    CATEGORICAL_B = "categorical_b"

    @property
    def is_categorical(self) -> bool:
        return self is not ColumnKind.NUMERIC


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: ColumnKind
    cardinality: int | None = None

    def __post_init__(self):
        kind = ColumnKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.is_categorical:
            if self.cardinality is None:
                raise ValueError(f"categorical column {self.name!r} needs a cardinality")
            expected = categorical_kind(self.cardinality)
            if kind is not expected:
                raise ValueError(
                    f"column {self.name!r} has cardinality {self.cardinality} "
                    f"but kind {kind.value}"
                )

    @classmethod
    def categorical(cls, name: str, cardinality: int) -> "ColumnMeta":
        return cls(name, categorical_kind(cardinality), cardinality)


def categorical_kind(cardinality: int) -> ColumnKind:
    if cardinality < ONE_HOT_MAX_CARDINALITY:
        return ColumnKind.CATEGORICAL_A
    return ColumnKind.CATEGORICAL_B


def missing_mask(values: np.ndarray) -> np.ndarray:
    """Boolean mask of missing cells (``NaN`` or ``None``) in an array."""
    values = np.asarray(values)
    if values.dtype.kind == "f":
        return np.isnan(values)
    if values.dtype == object:
        out = np.zeros(values.shape, dtype=bool)
        flat = values.ravel()
        o = out.ravel()
        for i, v in enumerate(flat):
            o[i] = v is None or (isinstance(v, float) and math.isnan(v))
        return out
    return np.zeros(values.shape, dtype=bool)


def _frozen(a: np.ndarray | None) -> np.ndarray | None:
    if a is None:
        return None
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable tabular container.

    ``values`` has shape ``(rows, len(columns))``; it is ``float64`` when all
    columns are numeric and ``object`` otherwise.
    """

    columns: tuple[ColumnMeta, ...]
    values: np.ndarray
    row_ids: np.ndarray
    labels: np.ndarray | None = None
    weights: np.ndarray | None = None
    provenance: np.ndarray | None = None
    dates: np.ndarray | None = None

    def __post_init__(self):
        columns = tuple(self.columns)
        object.__setattr__(self, "columns", columns)
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if values.shape[1] != len(columns):
            raise ValueError(
                f"values has {values.shape[1]} columns, metadata lists {len(columns)}"
            )
        if all(c.kind is ColumnKind.NUMERIC for c in columns) and values.dtype != object:
            values = values.astype(np.float64)
        n = values.shape[0]
        object.__setattr__(self, "values", _frozen(values))

        row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if row_ids.shape != (n,):
            raise ValueError("row_ids must have one entry per row")
        if np.unique(row_ids).size != n:
            raise ValueError("row_ids must be unique")
        object.__setattr__(self, "row_ids", _frozen(row_ids))

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ValueError("labels must have one entry per row")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.int8)))

        weights = np.ones(n) if self.weights is None else np.asarray(self.weights, float)
        if weights.shape != (n,):
            raise ValueError("weights must have one entry per row")
        if n and not (weights > 0).all():
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "weights", _frozen(weights))

        if self.provenance is not None:
            prov = np.asarray(self.provenance, dtype=np.int8)
            if prov.shape != (n,):
                raise ValueError("provenance must have one entry per row")
            object.__setattr__(self, "provenance", _frozen(prov))

        if self.dates is not None:
            dates = np.asarray(self.dates, dtype="datetime64[D]")
            if dates.shape != (n,):
                raise ValueError("dates must have one entry per row")
            object.__setattr__(self, "dates", _frozen(dates))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_rows(self) -> int:
        return len(self)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def is_numeric(self) -> bool:
        return self.values.dtype != object

    @property
    def X(self) -> np.ndarray:
        """Feature matrix as ``float64``; fails if any column is categorical."""
        if not self.is_numeric:
            raise TypeError("dataset has categorical columns; run preprocess.transform first")
        return self.values

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def missing_count(self, name: str | None = None) -> int:
        cells = self.values if name is None else self.column(name)
        return int(missing_mask(cells).sum())

    def replace(self, **changes) -> "Dataset":
        return dataclasses.replace(self, **changes)

    def take(self, index) -> "Dataset":
        """Rows at positional ``index`` (integer array or boolean mask)."""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)

        def pick(a):
            return None if a is None else a[index]

        return Dataset(
            columns=self.columns,
            values=self.values[index],
            row_ids=self.row_ids[index],
            labels=pick(self.labels),
            weights=self.weights[index],
            provenance=pick(self.provenance),
            dates=pick(self.dates),
        )

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        order = np.argsort(self.row_ids, kind="stable")
        pos = np.searchsorted(self.row_ids[order], ids)
        pos = np.clip(pos, 0, len(self) - 1) if len(self) else pos
        if len(self) == 0 or not np.array_equal(self.row_ids[order][pos], ids):
            missing = np.setdiff1d(ids, self.row_ids)
            raise KeyError(f"row ids not present: {missing[:10].tolist()}")
        return order[pos]

    def select_ids(self, ids) -> "Dataset":
        return self.take(self.positions(ids))

    def drop_ids(self, ids) -> "Dataset":
        keep = ~np.isin(self.row_ids, np.asarray(ids, dtype=np.int64))
        return self.take(keep)

    def with_labels(self, labels, provenance=None) -> "Dataset":
        return self.replace(labels=labels, provenance=provenance)

    def without_labels(self) -> "Dataset":
        return self.replace(labels=None, provenance=None)

    def with_weights(self, weights) -> "Dataset":
        return self.replace(weights=weights)

    def with_values(self, columns: Sequence[ColumnMeta], values: np.ndarray) -> "Dataset":
        return self.replace(columns=tuple(columns), values=values)


def concat(*datasets: Dataset) -> Dataset:
    """Stack datasets row-wise; column metadata must agree by name and kind."""
    datasets = [d for d in datasets if d is not None]
    if not datasets:
        raise ValueError("nothing to concatenate")
    first = datasets[0]
    for d in datasets[1:]:
        if [(c.name, c.kind) for c in d.columns] != [(c.name, c.kind) for c in first.columns]:
            raise ValueError("column metadata differs between datasets")

    def join(attr, fill=None):
        parts = [getattr(d, attr) for d in datasets]
        if all(p is None for p in parts):
            return None
        if any(p is None for p in parts):
            if fill is None:
                raise ValueError(f"cannot concatenate: {attr} present on only some datasets")
            parts = [fill(d) if p is None else p for d, p in zip(datasets, parts)]
        return np.concatenate(parts)

    values = np.concatenate([d.values for d in datasets], axis=0)
    labeled = [d.labels is not None for d in datasets]
    provenance = None
    if all(labeled):
        provenance = join("provenance", fill=lambda d: np.full(len(d), GROUND_TRUTH, np.int8))
    return Dataset(
        columns=first.columns,
        values=values,
        row_ids=np.concatenate([d.row_ids for d in datasets]),
        labels=join("labels"),
        weights=np.concatenate([d.weights for d in datasets]),
        provenance=provenance,
        dates=join("dates"),
    )


def from_arrays(X, y=None, *, row_ids=None, weights=None, names=None, dates=None) -> Dataset:
    """Numeric Dataset from a matrix; convenient for tests and demos."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"x{i}" for i in range(X.shape[1])]
    if row_ids is None:
        row_ids = np.arange(X.shape[0])
    provenance = None if y is None else np.full(X.shape[0], GROUND_TRUTH, np.int8)
    return Dataset(
        columns=tuple(ColumnMeta(n, ColumnKind.NUMERIC) for n in names),
        values=X,
        row_ids=row_ids,
        labels=y,
        weights=weights,
        provenance=provenance,
        dates=dates,
    )


# ----------------------------------------------------------------------------
# CSV ingestion

SCHEMA_KINDS = ("numeric", "categorical", "date")
_DATE_FORMATS = ("%Y-%m-%d", "%Y-%m", "%b-%Y", "%Y-%m-%dT%H:%M:%S")
_LABEL_MAP = {"0": 0, "1": 1, "0.0": 0, "1.0": 1}


def load_schema(path) -> list[tuple[str, str]]:
    """Read a schema file: one ``name,kind`` line per column, ``#`` comments allowed."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != 2:
                raise SchemaError(f"{path}:{lineno}: expected 'name,kind'")
            name, kind = row[0].strip(), row[1].strip().lower()
            if (name, kind) == ("name", "kind"):
                continue
            if kind not in SCHEMA_KINDS:
                raise SchemaError(f"{path}:{lineno}: unknown kind {kind!r}")
            entries.append((name, kind))
    return entries


def parse_date(text: str) -> np.datetime64:
    text = text.strip()
    for fmt in _DATE_FORMATS:
        try:
            return np.datetime64(_dt.datetime.strptime(text, fmt).date(), "D")
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {text!r}")


def _parse_float(text: str) -> float:
    text = text.strip().rstrip("%")
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_csv(path, schema, label_column: str | None = None, *, first_row_id: int = 0) -> Dataset:
    """Load a comma-delimited UTF-8 CSV with a header row.

    ``schema`` is a list of ``(name, kind)`` pairs or a path to a schema file.
    Header columns absent from the schema are ignored.  At most one ``date``
    column is allowed; it is kept on ``Dataset.dates`` and is not a feature.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    schema = [(n, k.lower()) for n, k in schema]

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    wanted = [n for n, _ in schema] + ([label_column] if label_column else [])
    absent = [n for n in wanted if n not in header]
    if absent:
        raise SchemaError(f"{path}: columns missing from header: {absent}")
    index = {h: i for i, h in enumerate(header)}
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")

    date_cols = [n for n, k in schema if k == "date"]
    if len(date_cols) > 1:
        raise SchemaError("at most one date column is supported")

    columns, cells = [], []
    for name, kind in schema:
        raw = [r[index[name]] for r in rows]
        if kind == "numeric":
            columns.append(ColumnMeta(name, ColumnKind.NUMERIC))
            cells.append(np.array([_parse_float(v) for v in raw], dtype=object))
        elif kind == "categorical":
            vals = np.array([v.strip() or None for v in raw], dtype=object)
            card = len({v for v in vals if v is not None})
            columns.append(ColumnMeta.categorical(name, card))
            cells.append(vals)

    dates = None
    if date_cols:
        raw = [r[index[date_cols[0]]] for r in rows]
        try:
            dates = np.array([parse_date(v) for v in raw], dtype="datetime64[D]")
        except ValueError as exc:
            raise SchemaError(f"{path}: column {date_cols[0]!r}: {exc}") from None

    labels = None
    if label_column:
        labels = np.empty(len(rows), dtype=np.int8)
        for i, r in enumerate(rows):
            v = r[index[label_column]].strip()
            if v not in _LABEL_MAP:
                raise SchemaError(
                    f"{path}: label column {label_column!r} row {i + 2}: "
                    f"value {v!r} is not 0/1"
                )
            labels[i] = _LABEL_MAP[v]

    n = len(rows)
    values = np.column_stack(cells) if cells else np.empty((n, 0), dtype=object)
    if all(c.kind is ColumnKind.NUMERIC for c in columns):
        values = values.astype(float)
    return Dataset(
        columns=tuple(columns),
        values=values,
        row_ids=np.arange(first_row_id, first_row_id + n),
        labels=labels,
        provenance=None if labels is None else np.zeros(n, np.int8),
        dates=dates,
    )


def save_csv(ds: Dataset, path, *, label_column: str = "label", date_column: str = "date") -> None:
    """Write a Dataset as CSV (row ids, features, then date and label when present)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["row_id"] + ds.column_names
    if ds.dates is not None:
        header.append(date_column)
    if ds.labels is not None:
        header.append(label_column)
    miss = missing_mask(ds.values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            row = [str(int(ds.row_ids[i]))]
            for j, v in enumerate(ds.values[i]):
                row.append("" if miss[i, j] else (repr(float(v)) if ds.columns[j].kind is ColumnKind.NUMERIC else str(v)))
            if ds.dates is not None:
                row.append(str(ds.dates[i]))
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def schema_of(ds: Dataset, date_column: str = "date") -> list[tuple[str, str]]:
    out = [(c.name, "numeric" if c.kind is ColumnKind.NUMERIC else "categorical") for c in ds.columns]
    if ds.dates is not None:
        out.append((date_column, "date"))
    return out


def save_schema(entries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "kind"])
        w.writerows(entries)


# ----------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitSpec:
    """Either random ``fractions`` or ascending date ``boundaries``.

    With boundaries ``b1 < b2 < ...`` the partitions are ``date < b1``,
    ``b1 <= date < b2``, ..., ``date >= bk``.
    """

    fractions: tuple[float, ...] | None = None
    boundaries: tuple[str, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.fractions is None) == (self.boundaries is None):
            raise ValueError("give exactly one of fractions or boundaries")
        if self.fractions is not None:
            fr = tuple(float(f) for f in self.fractions)
            if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
                raise ValueError(f"fractions must be non-negative and sum to 1, got {fr}")
            object.__setattr__(self, "fractions", fr)
        else:
            b = tuple(str(x) for x in self.boundaries)
            d = np.array(b, dtype="datetime64[D]")
            if len(d) == 0 or (np.diff(d) <= np.timedelta64(0, "D")).any():
                raise ValueError("boundaries must be non-empty and strictly increasing")
            object.__setattr__(self, "boundaries", b)

    @classmethod
    def year_quarters(cls, year: int) -> "SplitSpec":
        """January-September versus October-December of ``year``."""
        return cls(boundaries=(f"{year}-10-01",))


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items to ``fractions``."""
    exact = np.asarray(fractions, float) * n
    sizes = np.floor(exact + 1e-9).astype(int)
    short = n - sizes.sum()
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[:short]] += 1
    return sizes.tolist()


def split(ds: Dataset, spec: SplitSpec) -> list[Dataset]:
    if spec.fractions is not None:
        sizes = split_sizes(len(ds), spec.fractions)
        perm = np.random.default_rng(spec.seed).permutation(len(ds))
        parts, start = [], 0
        for s in sizes:
            parts.append(ds.take(np.sort(perm[start:start + s])))
            start += s
    else:
        if ds.dates is None:
            raise ValueError("temporal split needs a dataset with dates")
        edges = np.array(spec.boundaries, dtype="datetime64[D]")
        bucket = np.searchsorted(edges, ds.dates, side="right")
        parts = [ds.take(bucket == i) for i in range(len(edges) + 1)]
    for i, p in enumerate(parts):
        if len(p) == 0:
            warnings.warn(f"split partition {i} is empty", EmptySplitWarning, stacklevel=2)
    return parts


def filter_year(ds: Dataset, year: int) -> Dataset:
    if ds.dates is None:
        raise ValueError("dataset has no dates")
    years = ds.dates.astype("datetime64[Y]").astype(int) + 1970
    return ds.take(years == year)


# ----------------------------------------------------------------------------
# Synthetic credit data


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings for :func:`synth_credit`.

    Goods are ``N(0, I)``; bads are ``N(separation * u, I)`` where ``u`` is
    the unit vector over the first ``n_informative`` features.  Rejects mix
    the classes at ``bad_rate + bias * (reject_bad_rate - bad_rate)`` and are
    translated by ``bias * offset``.
    """

    n_features: int = 6
    n_informative: int = 3
    separation: float = 1.5
    bad_rate: float = 0.15
    reject_bad_rate: float = 0.45
    offset: tuple[float, ...] = (0.6, 0.6, 0.6, 2.0, 2.0, 0.0)

    def __post_init__(self):
        if len(self.offset) != self.n_features:
            raise ValueError("offset must have n_features entries")
        if not 0 < self.n_informative <= self.n_features:
            raise ValueError("n_informative must be in 1..n_features")

    @property
    def bad_mean(self) -> np.ndarray:
        u = np.zeros(self.n_features)
        u[: self.n_informative] = 1.0 / math.sqrt(self.n_informative)
        return self.separation * u

    def reject_bad_rate_at(self, bias: float) -> float:
        return self.bad_rate + bias * (self.reject_bad_rate - self.bad_rate)

    def mean_shift(self, bias: float) -> np.ndarray:
        """Expected difference of reject and accepted feature means."""
        mix = self.reject_bad_rate_at(bias) - self.bad_rate
        return bias * np.asarray(self.offset) + mix * self.bad_mean


def _draw(rng, n, bad_rate, spec: SynthSpec):
    y = (rng.random(n) < bad_rate).astype(np.int8)
    X = rng.standard_normal((n, spec.n_features)) + np.outer(y, spec.bad_mean)
    return X, y


def synth_credit(
    n_accept: int,
    n_reject: int,
    bias: float,
    seed: int,
    spec: SynthSpec | None = None,
    year: int | None = None,
) -> tuple[Dataset, Dataset, Dataset]:
    """Draw (labeled accepts, unlabeled rejects, rejects with hidden labels).

    ``bias=0`` draws rejects from the accepted distribution.  When ``year``
    is given every row gets a uniformly random date in that year.
    """
    if n_accept <= 0 or n_reject <= 0:
        raise ValueError("counts must be positive")
    if not 0.0 <= bias <= 1.0:
        raise ValueError("bias must lie in [0, 1]")
    spec = spec or SynthSpec()
    rng = np.random.default_rng(seed)
    Xa, ya = _draw(rng, n_accept, spec.bad_rate, spec)
    Xr, yr = _draw(rng, n_reject, spec.reject_bad_rate_at(bias), spec)
    Xr = Xr + bias * np.asarray(spec.offset)

    dates_a = dates_r = None
    if year is not None:
        start = np.datetime64(f"{year}-01-01")
        days = int((np.datetime64(f"{year + 1}-01-01") - start).astype(int))
        dates_a = start + rng.integers(0, days, n_accept)
        dates_r = start + rng.integers(0, days, n_reject)

    names = [f"f{i}" for i in range(spec.n_features)]
    accepted = from_arrays(Xa, ya, names=names, dates=dates_a)
    hidden = from_arrays(
        Xr, yr, names=names, row_ids=np.arange(n_accept, n_accept + n_reject), dates=dates_r
    )
    return accepted, hidden.without_labels(), hidden


@dataclass(frozen=True)
class TrainState:
    """Labeled pool plus the still-unlabeled reject pool."""

    labeled: Dataset
    rejects: Dataset
    iteration: int = 0

    def __post_init__(self):
        if self.labeled.labels is None:
            raise ValueError("the labeled pool must carry labels")
        if self.rejects.labels is not None:
            raise ValueError("the reject pool must not expose labels")
        if np.intersect1d(self.labeled.row_ids, self.rejects.row_ids).size:
            raise ValueError("labeled and reject pools share row ids")

    @property
    def total(self) -> int:
        return len(self.labeled) + len(self.rejects)

    @classmethod
    def initial(cls, accepted: Dataset, rejects: Dataset) -> "TrainState":
        prov = accepted.provenance
        if prov is None:
            prov = np.full(len(accepted), GROUND_TRUTH, np.int8)
        return cls(accepted.replace(provenance=prov), rejects.without_labels())
