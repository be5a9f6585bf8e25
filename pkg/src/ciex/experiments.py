"""Experiment configuration, the per-cell pipeline, the runner and CSV reports.

A *cell* is one (method, condition, replicate) triple.  Its data split
depends only on (condition, replicate) so every method in the same
replicate sees the same rows; its method seed also mixes in the method
name, so adding a method never perturbs the others.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import os
import platform
import re
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy
import yaml
from scipy import stats

from . import __version__
from . import baselines as B
from .classifier import ClassifierSpec
from .data import (
    Dataset,
    SplitSpec,
    TrainState,
    filter_year,
    load_csv,
    load_schema,
    split,
    synth_credit,
)
from .framework import CiexSpec, run_ciex, select_iteration
from .isoforest import IsoForestSpec
from .metrics import AUK_GRID, auc, auk_details, inputs_from_models, kickout_details
from .policy import DEFAULT_FRACTIONS, POLICY_CLASSIFIER, PolicySpec, make_seven_way
from .preprocess import fit_pipeline, transform
from .spreading import SpreadSpec

KINDS = ("synthetic", "policy_sweep", "temporal")
METHODS = ("BM", "A-UW", "A-DW", "A-SC", "A-FU", "E-FULL", "E-BAD", "E-C", "PAR", "LSP", "CI-EX")
SEED_PRESETS = {
    "sweep": [120054, 388388, 570334, 907360, 938870],
    "twenty": list(range(20)),
}
_METHOD_PARAMS = {
    "BM": set(),
    "A-UW": set(),
    "A-DW": set(),
    "A-SC": {"n_bands"},
    "A-FU": set(),
    "E-FULL": set(),
    "E-BAD": set(),
    "E-C": {"q"},
    "PAR": {"n_bands", "prejudice"},
    "LSP": {"graph", "k", "bandwidth", "alpha"},
    "CI-EX": {"eta", "bad_fraction", "contamination", "max_iterations", "n_trees", "subsample_size"},
}


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


# ----------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class MethodConfig:
    name: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", self.name)


def _expand_method(entry) -> list[MethodConfig]:
    """A method entry whose parameters are lists expands into one variant per combination."""
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"method entry needs a name: {entry!r}")
    name = str(entry["name"]).upper()
    if name not in METHODS:
        raise ConfigError(f"unknown method {entry['name']!r}; known: {', '.join(METHODS)}")
    params = dict(entry.get("params") or {})
    unknown = set(params) - _METHOD_PARAMS[name]
    if unknown:
        raise ConfigError(f"method {name} does not take {sorted(unknown)}")
    listed = [k for k, v in params.items() if isinstance(v, list)]
    if not listed:
        return [MethodConfig(name, params, entry.get("label", name))]
    out = []
    for combo in itertools.product(*(params[k] for k in listed)):
        p = dict(params)
        p.update(zip(listed, combo))
        tag = ",".join(f"{k}={v}" for k, v in zip(listed, combo))
        out.append(MethodConfig(name, p, f"{name}[{tag}]"))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    methods: tuple[MethodConfig, ...]
    seeds: tuple[int, ...]
    data: dict
    name: str = "experiment"
    master_seed: int = 0
    alpha: float = 0.5
    alpha_grid: tuple[float, ...] = tuple(AUK_GRID.tolist())
    threshold: str = "shared"
    topsis_weights: tuple[float, float] = (1.0, 10.0)
    selection: str = "auk"
    classifier: dict = field(default_factory=dict)
    output: str = "results"
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def conditions(self) -> list[tuple[str, Any]]:
        """``(label, value)`` per experimental condition, in config order."""
        if self.kind == "synthetic":
            return [(f"bias={b:g}", float(b)) for b in _as_list(self.data.get("bias", 0.5))]
        if self.kind == "policy_sweep":
            return [(f"eps={e:g}", float(e)) for e in self.data["epsilons"]]
        return [(f"year={int(y)}", int(y)) for y in self.data["years"]]

    def classifier_spec(self) -> ClassifierSpec:
        return ClassifierSpec(**self.classifier)

    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _alpha_grid(spec) -> tuple[float, ...]:
    if spec is None:
        return tuple(AUK_GRID.tolist())
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        n = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(a) for a in spec)


def parse_config(raw: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a config mapping; relative data paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {
        "kind", "name", "methods", "seeds", "master_seed", "data", "alpha", "alpha_grid",
        "threshold", "topsis_weights", "selection", "classifier", "output",
    }
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    kind = str(raw.get("kind", "")).lower().replace("-", "_")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {raw.get('kind')!r}")

    methods = []
    for entry in raw.get("methods") or []:
        methods.extend(_expand_method(entry))
    if not methods:
        raise ConfigError("at least one method is required")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError("method labels must be unique")

    seeds = raw.get("seeds")
    if isinstance(seeds, str):
        if seeds not in SEED_PRESETS:
            raise ConfigError(f"unknown seed preset {seeds!r}; known: {sorted(SEED_PRESETS)}")
        seeds = SEED_PRESETS[seeds]
    if not seeds:
        raise ConfigError("seeds must be a non-empty list or a preset name")
    seeds = tuple(int(s) for s in seeds)

    w = raw.get("topsis_weights", {"auc": 1.0, "kickout": 10.0})
    if isinstance(w, dict):
        w = (w.get("auc", 1.0), w.get("kickout", w.get("auk", 10.0)))
    w = tuple(float(x) for x in w)
    if len(w) != 2 or min(w) <= 0:
        raise ConfigError("topsis_weights must be two positive numbers")

    alpha = float(raw.get("alpha", 0.5))
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    grid = _alpha_grid(raw.get("alpha_grid"))
    if not grid or min(grid) <= 0 or max(grid) > 1:
        raise ConfigError("alpha_grid values must lie in (0, 1]")
    threshold = raw.get("threshold", "shared")
    if threshold not in ("shared", "separate"):
        raise ConfigError("threshold must be 'shared' or 'separate'")
    selection = raw.get("selection", "auk")
    if selection not in ("auk", "kickout"):
        raise ConfigError("selection must be 'auk' or 'kickout'")

    data = dict(raw.get("data") or {})
    base = Path(base_dir)
    for key in ("path", "schema", "accepted", "rejected"):
        if key in data and not Path(data[key]).is_absolute():
            data[key] = str(base / data[key])
    _check_data(kind, data)
    classifier = dict(raw.get("classifier") or {})
    try:
        ClassifierSpec(**classifier)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad classifier settings: {e}") from None

    return ExperimentConfig(
        kind=kind,
        methods=tuple(methods),
        seeds=seeds,
        data=data,
        name=str(raw.get("name", "experiment")),
        master_seed=int(raw.get("master_seed", 0)),
        alpha=alpha,
        alpha_grid=grid,
        threshold=threshold,
        topsis_weights=w,
        selection=selection,
        classifier=classifier,
        output=str(raw.get("output", "results")),
        raw=raw,
    )


def _check_data(kind: str, data: dict) -> None:
    def need(*keys):
        missing = [k for k in keys if k not in data]
        if missing:
            raise ConfigError(f"{kind} data section needs {missing}")

    if kind == "synthetic":
        need("n_accept", "n_reject")
        for b in _as_list(data.get("bias", 0.5)):
            if not 0 <= float(b) <= 1:
                raise ConfigError("bias must lie in [0, 1]")
    elif kind == "policy_sweep":
        need("path", "schema", "label", "epsilons")
        for e in data["epsilons"]:
            PolicySpec(epsilon=float(e))
    else:
        need("accepted", "rejected", "schema", "label", "years")
    for key in ("path", "schema", "accepted", "rejected"):
        if key in data and not Path(data[key]).exists():
            raise ConfigError(f"{key} file not found: {data[key]}")
    fr = data.get("fractions")
    if fr is not None:
        try:
            SplitSpec(fractions=tuple(fr))
        except ValueError as e:
            raise ConfigError(str(e)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(raw, base_dir=path.parent)


# ----------------------------------------------------------------------------
# Seeds and ids


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from any mix of strings and integers."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "little")


def cell_id(method: str, condition: str, seed: int) -> str:
    slug = re.sub(r"[^A-Za-z0-9.=,_-]+", "_", f"{method}__{condition}__s{seed}")
    return slug


@dataclass(frozen=True)
class Cell:
    method: MethodConfig
    condition: str
    value: Any
    replicate: int
    seed: int

    @property
    def id(self) -> str:
        return cell_id(self.method.label, self.condition, self.seed)


def plan_cells(config: ExperimentConfig, seed_offset: int = 0) -> list[Cell]:
    cells = []
    for cond, value in config.conditions:
        for r, s in enumerate(config.seeds):
            for m in config.methods:
                cells.append(Cell(m, cond, value, r, s + seed_offset))
    return cells


# ----------------------------------------------------------------------------
# Data for one (condition, replicate)


@dataclass(frozen=True)
class CellData:
    train_accepts: Dataset
    train_rejects: Dataset
    val_accepts: Dataset
    val_rejects: Dataset
    test_accepts: Dataset
    test_rejects: Dataset
    manifest: dict = field(default_factory=dict)


_CSV_CACHE: dict = {}


def _read(path, schema, label, first_row_id=0):
    key = (path, schema, label, first_row_id)
    if key not in _CSV_CACHE:
        _CSV_CACHE[key] = load_csv(path, load_schema(schema), label_column=label, first_row_id=first_row_id)
    return _CSV_CACHE[key]


def build_data(config: ExperimentConfig, condition: str, value, seed: int) -> CellData:
    data = config.data
    split_seed = derive_seed(config.master_seed, "split", condition, seed)
    if config.kind == "synthetic":
        acc, rej, _ = synth_credit(int(data["n_accept"]), int(data["n_reject"]), value, split_seed)
        sp = SplitSpec(fractions=tuple(data.get("fractions", (0.6, 0.2, 0.2))), seed=split_seed)
        a = split(acc, sp)
        r = split(rej, sp)
        return CellData(a[0], r[0], a[1], r[1], a[2], r[2], {"bias": value})
    if config.kind == "policy_sweep":
        ds = _read(data["path"], data["schema"], data["label"])
        spec = PolicySpec(
            epsilon=value,
            policy_fraction=float(data.get("policy_fraction", 0.2)),
            features=data.get("policy_features"),
            classifier=dataclasses.replace(POLICY_CLASSIFIER, **data.get("policy_classifier", {})),
            seed=split_seed,
        )
        sw = make_seven_way(ds, spec, tuple(data.get("fractions", DEFAULT_FRACTIONS)))
        return CellData(
            sw.train_accepts, sw.train_rejects, sw.val_accepts, sw.val_rejects,
            sw.test_accepts, sw.test_rejects, sw.manifest(condition, seed),
        )
    acc_all = _read(data["accepted"], data["schema"], data["label"])
    # rejected rows are numbered after the accepted file so ids never collide
    rej_all = _read(data["rejected"], data["schema"], None, first_row_id=len(acc_all))
    acc, rej = filter_year(acc_all, value), filter_year(rej_all, value)
    boundary = SplitSpec.year_quarters(value)
    val_fraction = float(data.get("val_fraction", 0.3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a_fit, a_test = split(acc, boundary)
        r_fit, r_test = split(rej, boundary)
    sp = SplitSpec(fractions=(1 - val_fraction, val_fraction), seed=split_seed)
    a_tr, a_va = split(a_fit, sp)
    r_tr, r_va = split(r_fit, sp)
    return CellData(a_tr, r_tr, a_va, r_va, a_test, r_test, {"year": value, "boundary": boundary.boundaries[0]})


def _featurize(d: CellData) -> CellData:
    """Fit the preprocessing pipeline on train-accepts and apply it everywhere."""
    model = fit_pipeline(d.train_accepts)
    parts = {f.name: transform(model, getattr(d, f.name)) for f in dataclasses.fields(d) if f.name != "manifest"}
    return CellData(manifest=d.manifest, **parts)


# ----------------------------------------------------------------------------
# Methods


def train_method(method: MethodConfig, d: CellData, clf: ClassifierSpec, seed: int, config: ExperimentConfig):
    """Fit the method's final model.  Returns ``(model, extras)``."""
    p = method.params
    tr, rj = d.train_accepts, d.train_rejects
    name = method.name

    def fit(ds: Dataset):
        return clf.fit(ds.X, ds.labels, ds.weights)

    if name == "BM":
        return fit(tr), {}
    if name == "A-UW":
        return fit(B.augment_upward(tr, rj, clf)), {}
    if name == "A-DW":
        return fit(B.augment_downward(tr, rj, clf)), {}
    if name == "A-SC":
        return fit(B.augment_soft_cutoff(tr, rj, int(p.get("n_bands", B.DEFAULT_BANDS)), clf)), {}
    if name == "A-FU":
        return fit(B.augment_fuzzy(tr, rj, clf).labeled), {}
    if name in ("E-FULL", "E-BAD", "E-C"):
        mode = {"E-FULL": "full", "E-BAD": "bad", "E-C": "confident"}[name]
        st = B.extrapolate(tr, rj, mode, float(p.get("q", B.DEFAULT_CONFIDENT_FRACTION)), clf)
        return fit(st.labeled), {"merged": len(st.labeled) - len(tr)}
    if name == "PAR":
        st = B.parceling(
            tr, rj, int(p.get("n_bands", B.DEFAULT_BANDS)), float(p.get("prejudice", B.DEFAULT_PREJUDICE)), seed, clf
        )
        return fit(st.labeled), {}
    if name == "LSP":
        spec = SpreadSpec(**{k: p[k] for k in ("graph", "k", "bandwidth", "alpha") if k in p})
        return fit(B.lsp_ri(tr, rj, spec).labeled), {}
    if name == "CI-EX":
        forest = IsoForestSpec(
            n_trees=int(p.get("n_trees", 100)),
            subsample_size=int(p.get("subsample_size", 256)),
            contamination=float(p.get("contamination", 0.12)),
        )
        spec = CiexSpec(
            eta=int(p.get("eta", 1000)),
            bad_fraction=float(p.get("bad_fraction", 0.07)),
            contamination=float(p.get("contamination", 0.12)),
            max_iterations=int(p.get("max_iterations", 50)),
            classifier=clf,
            forest=forest,
            seed=seed,
        )
        run = run_ciex(
            TrainState.initial(tr, rj),
            spec,
            (d.val_accepts, d.val_rejects),
            alpha=config.alpha,
            alphas=config.alpha_grid,
            keep_states=False,
            threshold=config.threshold,
        )
        chosen = select_iteration(run.records, config.topsis_weights, config.selection)
        return run.models[chosen], {
            "chosen_iteration": chosen,
            "iterations": [r.to_dict() for r in run.records],
        }
    raise ValueError(f"unknown method {name}")


def run_cell(config: ExperimentConfig, cell: Cell) -> dict:
    """Run one cell; never raises.  Failures come back as ``status: failed`` records."""
    t0 = time.perf_counter()
    record = {
        "cell": cell.id,
        "method": cell.method.label,
        "method_name": cell.method.name,
        "params": cell.method.params,
        "condition": cell.condition,
        "seed": cell.seed,
        "replicate": cell.replicate,
        "cell_seed": derive_seed(config.master_seed, cell.method.label, cell.condition, cell.seed),
    }
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            raw = build_data(config, cell.condition, cell.value, cell.seed)
            d = _featurize(raw)
            clf = config.classifier_spec()
            bm = clf.fit(d.train_accepts.X, d.train_accepts.labels)
            model, extras = train_method(cell.method, d, clf, record["cell_seed"], config)
        inputs = inputs_from_models(bm, model, d.test_accepts, d.test_rejects, config.threshold)
        curve = auk_details(inputs, config.alpha_grid)
        record.update(
            status="ok",
            auc=auc(model.predict_proba(d.test_accepts.X), d.test_accepts.labels),
            bm_auc=auc(bm.predict_proba(d.test_accepts.X), d.test_accepts.labels),
            auk=curve.value,
            kickout=kickout_details(inputs, config.alpha).value,
            alphas=curve.alphas.tolist(),
            kickouts=curve.kickouts.tolist(),
            degenerate_alphas=int(curve.degenerate.sum()),
            benchmark={
                "trained_on": "train_accepts",
                "rows": len(d.train_accepts),
                "labels": "ground_truth",
            },
            sizes={f.name: len(getattr(d, f.name)) for f in dataclasses.fields(d) if f.name != "manifest"},
            split=raw.manifest,
            chosen_iteration=extras.pop("chosen_iteration", None),
            **extras,
        )
    except Exception as e:  # one bad cell must not sink the run
        record.update(status="failed", error=f"{type(e).__name__}: {e}", traceback=traceback.format_exc())
    record["wall_time"] = time.perf_counter() - t0
    return record


# ----------------------------------------------------------------------------
# Runner


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _cell_task(args):
    config, cell, out = args
    rec = run_cell(config, cell)
    _atomic_write(Path(out) / "cells" / f"{cell.id}.json", _json(rec))
    return cell.id, rec["status"]


def run_experiment(
    config: ExperimentConfig,
    out: str | Path | None = None,
    jobs: int | None = None,
    seed_offset: int = 0,
    progress=None,
) -> Path:
    """Run every cell, write ``cells/``, ``manifest.json`` and ``report/``.

    ``out`` and ``jobs`` fall back to ``CIEX_OUT`` / ``CIEX_JOBS`` and then
    to the config.  Raises ``RuntimeError`` when every cell failed.
    """
    out = Path(out or os.environ.get("CIEX_OUT") or config.output)
    jobs = int(jobs or os.environ.get("CIEX_JOBS") or 1)
    cells = plan_cells(config, seed_offset)
    manifest = {
        "name": config.name,
        "kind": config.kind,
        "config_sha256": config.config_hash(),
        "config": config.raw,
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "seed_offset": seed_offset,
        "methods": [m.label for m in config.methods],
        "conditions": [c for c, _ in config.conditions],
        "seeds": {
            c.id: {"replicate_seed": c.seed, "cell_seed": derive_seed(config.master_seed, c.method.label, c.condition, c.seed)}
            for c in cells
        },
        "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    _atomic_write(out / "manifest.json", _json(manifest))

    tasks = [(config, c, str(out)) for c in cells]
    statuses = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cid, status in pool.map(_cell_task, tasks):
                statuses.append(status)
                if progress:
                    progress(cid, status)
    else:
        for t in tasks:
            cid, status = _cell_task(t)
            statuses.append(status)
            if progress:
                progress(cid, status)
    report(out)
    if statuses and all(s == "failed" for s in statuses):
        raise RuntimeError(f"all {len(statuses)} cells failed; see {out / 'report' / 'failed.csv'}")
    return out


# ----------------------------------------------------------------------------
# Reports


def load_cells(result_dir: str | Path) -> list[dict]:
    files = sorted((Path(result_dir) / "cells").glob("*.json"))
    return [json.loads(f.read_text(encoding="utf-8")) for f in files]


def fmt(x) -> str:
    """Fixed, platform-independent float formatting for CSV output."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """Mean and two-sided t-interval; a single value gets a zero-width interval."""
    v = np.asarray(values, float)
    m = float(v.mean())
    if v.size < 2:
        return m, m, m
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / math.sqrt(v.size))
    return m, m - half, m + half


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _ordered(values, preferred):
    seen = [v for v in preferred if v in values]
    return seen + sorted(v for v in values if v not in seen)


def report(result_dir: str | Path) -> Path:
    """Write the CSV matrices under ``<result_dir>/report`` and return that path."""
    result_dir = Path(result_dir)
    cells = load_cells(result_dir)
    if not cells:
        raise FileNotFoundError(f"no cell records under {result_dir / 'cells'}")
    man_path = result_dir / "manifest.json"
    man = json.loads(man_path.read_text()) if man_path.exists() else {}
    ok = [c for c in cells if c["status"] == "ok"]
    failed = [c for c in cells if c["status"] != "ok"]
    methods = _ordered({c["method"] for c in cells}, man.get("methods", []))
    conds = _ordered({c["condition"] for c in cells}, man.get("conditions", []))
    rep = result_dir / "report"

    def matrix(key):
        rows = []
        for m in methods:
            row = [m]
            for cond in conds:
                vals = [c[key] for c in ok if c["method"] == m and c["condition"] == cond]
                row.append(fmt(np.mean(vals)) if vals else "")
            rows.append(row)
        return _csv(rows, ["method"] + conds)

    _atomic_write(rep / "auc_matrix.csv", matrix("auc"))
    _atomic_write(rep / "auk_matrix.csv", matrix("auk"))

    scatter = []
    for m in methods:
        for cond in conds:
            cs = [c for c in ok if c["method"] == m and c["condition"] == cond]
            if cs:
                d_auc = [c["auc"] - c["bm_auc"] for c in cs]
                scatter.append([m, cond, len(cs), fmt(np.mean(d_auc)), fmt(np.mean([c["auk"] for c in cs]))])
    _atomic_write(rep / "scatter.csv", _csv(scatter, ["method", "condition", "n", "delta_auc", "auk"]))

    curves = []
    for m in methods:
        for cond in conds:
            runs = [c["iterations"] for c in ok if c["method"] == m and c["condition"] == cond and c.get("iterations")]
            if not runs:
                continue
            for it in range(max(len(r) for r in runs)):
                at = [r[it] for r in runs if len(r) > it]
                a = mean_ci([x["val_auc"] for x in at])
                k = mean_ci([x["val_auk"] for x in at])
                curves.append([m, cond, it, len(at), *map(fmt, a), *map(fmt, k)])
    _atomic_write(
        rep / "ciex_iterations.csv",
        _csv(
            curves,
            ["method", "condition", "iteration", "n", "auc_mean", "auc_lo", "auc_hi", "auk_mean", "auk_lo", "auk_hi"],
        ),
    )
    fails = [[c["cell"], c["method"], c["condition"], c["seed"], c.get("error", "")] for c in failed]
    _atomic_write(rep / "failed.csv", _csv(fails, ["cell", "method", "condition", "seed", "error"]))
    return rep
