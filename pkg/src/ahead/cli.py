"""Command-line entry point: ``ahead gen-data | ingest | run | sweep | report``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, data
from .errors import AheadError, ConfigurationError


def _synthetic_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic data")
    g.add_argument("--distribution", choices=[d.value for d in data.Distribution])
    g.add_argument("--n", type=int, help="number of records")
    g.add_argument("--domain-side", type=int)
    g.add_argument("--m", type=int, help="number of attributes")
    g.add_argument("--correlation", type=float)
    g.add_argument("--skewness", type=float)
    g.add_argument("--data-seed", type=int, help="seed for synthetic generation")


def _synthetic_spec(args, base: data.SyntheticSpec | None = None) -> data.SyntheticSpec:
    spec = base or data.SyntheticSpec()
    overrides = {k: v for k, v in {
        "distribution": args.distribution, "n": args.n, "domain_side": args.domain_side,
        "m": args.m, "correlation": args.correlation, "skewness": args.skewness,
        "seed": getattr(args, "data_seed", None)}.items() if v is not None}
    return replace(spec, **overrides)


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override it")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--data", help="dataset cache file (otherwise synthetic flags are used)")
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--n-queries", type=int)
    p.add_argument("--reps", type=int, help="number of repetitions")
    p.add_argument("--fanout", type=int)
    p.add_argument("--out", type=Path, help="write the report (.csv or .json)")
    _synthetic_args(p)


def _config(args, method_required: bool = True) -> bench.ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load config {args.config}: {exc}") from exc
    method = getattr(args, "method", None) or raw.get("method")
    if method is None:
        if method_required:
            raise ConfigurationError("no method given (use --method or a config file)")
        method = bench.Method.UNIFORM.value
    source = raw.get("data")
    if args.data is not None:
        source = args.data
    elif source is None or isinstance(source, dict):
        base = data.SyntheticSpec(**source) if isinstance(source, dict) else None
        source = _synthetic_spec(args, base)
    fields = {
        "method": method, "data": source, "seed": args.seed,
        "epsilons": args.epsilons or raw.get("epsilons", (1.0,)),
        "n_queries": args.n_queries or raw.get("n_queries", 200),
        "n_repetitions": args.reps or raw.get("n_repetitions", 20),
        "fanout": args.fanout or raw.get("fanout"),
        "theta": getattr(args, "theta", None) if getattr(args, "theta", None) is not None
        else raw.get("theta"),
        "theta_scale": getattr(args, "theta_scale", None)
        if getattr(args, "theta_scale", None) is not None else raw.get("theta_scale"),
    }
    return bench.ExperimentConfig(**fields)


def _emit(report: bench.MseReport, out: Path | None) -> None:
    if out is not None:
        bench.export_report(report, out)
    print(",".join(bench.COLUMNS))
    for r in report:
        print(",".join(str(getattr(r, c)) for c in bench.COLUMNS))


def cmd_gen_data(args) -> None:
    ds = data.gen_synthetic(_synthetic_spec(args))
    data.save_cache(ds, args.out)
    print(f"wrote {len(ds)} records x {ds.m} attributes to {args.out}")


def cmd_ingest(args) -> None:
    ds = data.ingest_csv(args.csv, args.columns, args.domain_side, args.truncation)
    data.save_cache(ds, args.out)
    print(f"wrote {len(ds)} records to {args.out} "
          f"(retained {ds.provenance['retained_fraction']:.4f})")


def cmd_run(args) -> None:
    _emit(bench.run_experiment(_config(args)), args.out)


def cmd_sweep(args) -> None:
    cfg = _config(args, method_required=not args.methods)
    report = bench.run_sweep(cfg, methods=args.methods, ns=args.ns,
                             domain_sides=args.domain_sides, thetas=args.thetas,
                             theta_scales=args.theta_scales)
    _emit(report, args.out)


def cmd_report(args) -> None:
    merged = bench.MseReport()
    for path in args.inputs:
        merged.extend(bench.read_report(path))
    _emit(merged, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ahead", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset cache")
    _synthetic_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("ingest", help="bucketize CSV columns into a dataset cache")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--columns", nargs="+", required=True)
    p.add_argument("--domain-side", type=int, required=True)
    p.add_argument("--truncation", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--method", choices=[m.value for m in bench.Method])
    p.add_argument("--theta", type=float)
    p.add_argument("--theta-scale", type=float)
    _experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of experiments")
    p.add_argument("--method", choices=[m.value for m in bench.Method])
    p.add_argument("--methods", nargs="+", choices=[m.value for m in bench.Method])
    p.add_argument("--ns", type=int, nargs="+")
    p.add_argument("--domain-sides", type=int, nargs="+")
    p.add_argument("--thetas", type=float, nargs="+")
    p.add_argument("--theta-scales", type=float, nargs="+")
    _experiment_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="merge report files")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (AheadError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
