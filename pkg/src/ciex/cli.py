"""Command-line front end: ``ciex run | report | validate-config | synth``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import save_csv, save_schema, schema_of, synth_credit
from .experiments import ConfigError, load_config, plan_cells, report, run_experiment
from .policy import logit_normal_params, policy_population


def _run(args) -> int:
    config = load_config(args.config)

    def progress(cid, status):
        print(f"{status:>6}  {cid}", flush=True)

    try:
        out = run_experiment(config, args.out, args.jobs, args.seed_offset, progress)
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"results in {out}")
    return 0


def _report(args) -> int:
    rep = report(args.out)
    for f in sorted(rep.glob("*.csv")):
        print(f)
    return 0


def _validate(args) -> int:
    config = load_config(args.config)
    n = len(plan_cells(config, args.seed_offset))
    print(
        f"ok: {config.kind}, {len(config.methods)} method variant(s), "
        f"{len(config.conditions)} condition(s), {len(config.seeds)} seed(s), {n} cells"
    )
    return 0


def _synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "policy":
        mu, s = logit_normal_params({0.30: args.low_share, 0.65: args.high_share})
        pop = policy_population(args.n_accept, mu, s, args.seed)
        save_csv(pop, out / "population.csv")
        save_schema(schema_of(pop), out / "schema.csv")
        print(f"wrote {len(pop)} rows to {out / 'population.csv'}")
        return 0
    year = args.year if args.kind == "temporal" else None
    acc, rej, hidden = synth_credit(args.n_accept, args.n_reject, args.bias, args.seed, year=year)
    save_csv(acc, out / "accepted.csv")
    save_csv(rej, out / "rejected.csv")
    save_csv(hidden, out / "rejected_truth.csv")
    save_schema(schema_of(acc), out / "schema.csv")
    print(f"wrote {len(acc)} accepted and {len(rej)} rejected rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ciex", description="Reject-inference experiments with CI-EX and classical baselines.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every cell of an experiment config, then write the report")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="result directory (default: CIEX_OUT or the config's output)")
    r.add_argument("--jobs", type=int, help="parallel cells (default: CIEX_JOBS or 1)")
    r.add_argument("--seed-offset", type=int, default=0, help="added to every replicate seed")
    r.set_defaults(func=_run)

    rp = sub.add_parser("report", help="rebuild report/*.csv from cells/*.json")
    rp.add_argument("--out", required=True, help="result directory")
    rp.set_defaults(func=_report)

    v = sub.add_parser("validate-config", help="check a config without running anything")
    v.add_argument("--config", required=True)
    v.add_argument("--seed-offset", type=int, default=0)
    v.set_defaults(func=_validate)

    s = sub.add_parser("synth", help="write synthetic datasets as CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--kind", choices=("credit", "temporal", "policy"), default="credit")
    s.add_argument("--n-accept", type=int, default=5000)
    s.add_argument("--n-reject", type=int, default=10000)
    s.add_argument("--bias", type=float, default=0.5)
    s.add_argument("--year", type=int, default=2015)
    s.add_argument("--low-share", type=float, default=7463 / 125955, help="accepted share at eps=0.30 (policy kind)")
    s.add_argument("--high-share", type=float, default=117612 / 125955, help="accepted share at eps=0.65 (policy kind)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
