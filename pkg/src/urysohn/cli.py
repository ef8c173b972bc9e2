"""Command-line interface: ``urysohn <command> [options]``.

Every run is described by a key=value config file (``--config``) with any
setting overridable by a flag of the same name (``--alpha-root 0.1``).
Reports go to stdout as key=value lines; ``--report`` also writes JSON.

Exit codes: 0 success, 1 data or config error, 2 an ``--assert`` failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import operator
import re
import sys
from pathlib import Path

import numpy as np

from . import bench, metrics, store
from .data import parse_with_columns, synth_generate, write_csv
from .experiment import (RunConfig, load_dataset, model_file, parse_settings, read_config_file, run_cv,
                         run_select, run_train)

log = logging.getLogger("urysohn")

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2

_OPS = {">=": operator.ge, "<=": operator.le, ">": operator.gt, "<": operator.lt, "==": operator.eq}
_ASSERT = re.compile(r"^\s*([A-Za-z_.]+)\s*(>=|<=|==|>|<)\s*([-+0-9.eE]+)\s*$")


class AssertionFailed(Exception):
    pass


def _settings_parser() -> argparse.ArgumentParser:
    """Shared flags: one per RunConfig field, plus config file and output paths."""
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run settings (override the config file)")
    g.add_argument("--config", help="key=value settings file")
    for f in dataclasses.fields(RunConfig):
        g.add_argument("--" + f.name.replace("_", "-"), dest="set_" + f.name, metavar="VALUE")
    out = p.add_argument_group("outputs")
    out.add_argument("--report", help="write the report as JSON to this path")
    out.add_argument("--assert", dest="asserts", action="append", default=[], metavar="EXPR",
                     help="threshold on a reported metric, e.g. 'pearson>=0.98'; exit 2 if it fails")
    return p


def build_config(args: argparse.Namespace) -> RunConfig:
    pairs = read_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key.startswith("set_") and value is not None:
            pairs[key[4:]] = value
    return parse_settings(pairs)


def check_asserts(flat: dict, exprs: list[str]) -> list[str]:
    """Failed assertion messages; unknown metrics and bad syntax raise ValueError."""
    failed = []
    for expr in exprs:
        m = _ASSERT.match(expr)
        if not m:
            raise ValueError(f"cannot parse assertion {expr!r}; use e.g. 'pearson>=0.98'")
        key, op, bound = m.group(1), m.group(2), float(m.group(3))
        if key not in flat:
            raise ValueError(f"assertion on unknown metric {key!r}; reported: {', '.join(sorted(flat))}")
        value = flat[key]
        if value is None or not _OPS[op](value, bound):
            failed.append(f"{key}={value} fails {op} {bound:g}")
    return failed


def _emit(flat: dict, payload: dict, args) -> None:
    sys.stdout.write(metrics.to_keyvalue(flat))
    if getattr(args, "report", None):
        Path(args.report).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    failed = check_asserts(flat, getattr(args, "asserts", []))
    if failed:
        raise AssertionFailed("; ".join(failed))


def _report_fields(rep: metrics.EvalReport, prefix: str = "") -> dict:
    d = dataclasses.asdict(rep)
    d["accuracy"] = rep.accuracy
    return {prefix + k: v for k, v in d.items()}


def cmd_synth(args) -> None:
    ds = synth_generate(args.count, args.seed)
    write_csv(ds, args.out)
    sys.stdout.write(metrics.to_keyvalue({"records": len(ds), "seed": args.seed, "path": args.out}))


def cmd_train(args) -> None:
    cfg = build_config(args)
    ds = load_dataset(cfg)
    result = run_train(ds, cfg)
    mf = model_file(result.model, ds, cfg, result.seed)
    if args.model_out:
        store.save(mf, args.model_out)
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            skipped = result.trace.skipped or [0] * len(result.trace.residuals)
            for epoch, (r, s) in enumerate(zip(result.trace.residuals, skipped), 1):
                fh.write(json.dumps({"epoch": epoch, "mean_abs_residual": r, "skipped": s}) + "\n")
    flat = {"model": cfg.model, "records": len(ds), "seed": result.seed, **_report_fields(result.report)}
    _emit(flat, {"config": cfg.echo(), "train": dataclasses.asdict(result.report)}, args)


def _aggregate(values: list) -> dict:
    if any(v is None for v in values):
        return {"mean": None, "ci95": None}
    if len(values) < 2:
        return {"mean": float(values[0]), "ci95": None}
    ci = metrics.ci95(values)
    return {"mean": ci.mean, "ci95": ci.half_width}


def cmd_cv(args) -> None:
    cfg = build_config(args)
    ds = load_dataset(cfg)
    result = run_cv(ds, cfg)
    flat = {"model": cfg.model, "records": len(ds), "kfold": cfg.kfold, "repeats": cfg.repeats}
    keys = ["pearson", "nrmse"] + (["misclassified", "accuracy"] if cfg.classify else [])
    summary = {}
    for key in keys:
        agg = _aggregate([getattr(r, key) for r in result.reports])
        summary[key] = agg
        flat[key] = agg["mean"]
        flat[key + ".ci95"] = agg["ci95"]
    payload = {"config": cfg.echo(), "summary": summary,
               "repeats": [dataclasses.asdict(r) for r in result.reports],
               "folds": [[dataclasses.asdict(f) for f in rep] for rep in result.fold_reports]}
    if args.predictions_out:
        np.savetxt(args.predictions_out, np.column_stack(result.predictions), fmt="%.17g")
    _emit(flat, payload, args)


def cmd_select(args) -> None:
    cfg = build_config(args)
    ds = load_dataset(cfg)
    result = run_select(ds, cfg, execution=args.execution)
    if args.model_out:
        store.save(model_file(result.model, ds, cfg, result.seed), args.model_out)
    flat = {"model": cfg.model, "records": len(ds), "repeats": cfg.repeats, "seed": result.seed,
            **_report_fields(result.test, "test."), **_report_fields(result.selection, "selection.")}
    if cfg.classify:
        flat["misclassified"] = result.test.misclassified
        flat["accuracy"] = result.test.accuracy
    flat["pearson"] = result.test.pearson
    flat["nrmse"] = result.test.nrmse
    payload = {"config": cfg.echo(), "test": dataclasses.asdict(result.test),
               "selection": dataclasses.asdict(result.selection),
               "candidates": [dataclasses.asdict(c) for c in result.candidates]}
    _emit(flat, payload, args)


def cmd_predict(args) -> None:
    mf = store.load(args.model)
    if not mf.columns:
        raise ValueError(f"{args.model}: model file has no column layout")
    X, y = parse_with_columns(args.data, mf.columns, delimiter=args.delimiter, header=args.header)
    zhat = mf.predict(X)
    text = "".join(f"{v!r}\n" for v in map(float, zhat))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if y is None:
        return
    if mf.config.get("pm1") and not np.all(np.isin(y, (-1.0, 1.0))):
        y = np.where(y == y.max(), 1.0, -1.0)
    classify = bool(mf.config.get("classify"))
    rep = metrics.evaluate(y, zhat, classify=classify)
    flat = {"records": rep.n, **_report_fields(rep)}
    # with predictions on stdout the report goes to stderr
    stream = sys.stdout if args.out else sys.stderr
    stream.write(metrics.to_keyvalue(flat))
    if args.report:
        Path(args.report).write_text(json.dumps(dataclasses.asdict(rep), indent=1, sort_keys=True) + "\n")
    failed = check_asserts(flat, args.asserts)
    if failed:
        raise AssertionFailed("; ".join(failed))


def cmd_bench_run(args) -> None:
    names = list(bench.EXPERIMENTS) if args.name == "all" else [args.name]
    if args.name != "all" and args.name not in bench.EXPERIMENTS:
        raise ValueError(f"unknown experiment {args.name!r}; known: {', '.join(bench.EXPERIMENTS)}")
    failed = []
    for name in names:
        outcome = bench.run_experiment(name)
        bench.save_outcome(outcome, Path(args.results))
        print(f"{name}: {outcome.status}" + (f" ({outcome.message})" if outcome.message else ""))
        for c in outcome.checks:
            verdict = bench.PASS if c.passed else bench.FAIL
            print(f"  {verdict:4s} {c.label}: {c.value} [{c.band.describe()}; published {c.band.reference}]")
        if outcome.status == bench.FAIL:
            failed.append(name)
    if failed and args.check:
        raise AssertionFailed(f"experiments outside their bands: {', '.join(failed)}")


def cmd_bench_table(args) -> None:
    rows = bench.table_rows(bench.load_outcomes(Path(args.results)))
    sys.stdout.write(bench.format_table(rows))
    if args.dsv:
        Path(args.dsv).write_text(bench.format_dsv(rows, args.delimiter))


def cmd_bench_list(args) -> None:
    for name, exp in bench.EXPERIMENTS.items():
        files = ", ".join(str(bench.SOURCES[s].path()) for s in exp.sources) or "generated"
        print(f"{name}: {exp.description} [data: {files}]")
    if args.configs:
        print(json.dumps(bench.config_summary(), indent=1, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urysohn", description="Urysohn operator and tree identification")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    settings = _settings_parser()

    p = sub.add_parser("synth", help="write the synthetic benchmark dataset as CSV")
    p.add_argument("--count", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[settings], help="fit one model on all records")
    p.add_argument("--model-out", help="write the trained model here")
    p.add_argument("--trace-out", help="write per-epoch residuals here (JSON lines)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", parents=[settings], help="repeated k-fold cross-validation")
    p.add_argument("--predictions-out", help="out-of-fold predictions, one column per repeat")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("select", parents=[settings], help="train/selection/test protocol")
    p.add_argument("--model-out", help="write the selected model here")
    p.add_argument("--execution", type=int, default=0, help="execution counter (changes the split)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("predict", help="apply a saved model to a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--delimiter", default="auto")
    p.add_argument("--header", action="store_true", help="the file starts with a header line")
    p.add_argument("--out", help="write predictions here instead of stdout")
    p.add_argument("--report", help="write the report as JSON to this path")
    p.add_argument("--assert", dest="asserts", action="append", default=[], metavar="EXPR")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="pinned benchmark experiments")
    bsub = p.add_subparsers(dest="bench_command", required=True)
    b = bsub.add_parser("run", help="run one experiment or all")
    b.add_argument("name", help="experiment name or 'all'")
    b.add_argument("--results", default="results", help="directory for JSON outcomes")
    b.add_argument("--assert", dest="check", action="store_true", help="exit 2 if any experiment fails")
    b.set_defaults(func=cmd_bench_run)
    b = bsub.add_parser("table", help="print the comparison table from saved outcomes")
    b.add_argument("--results", default="results")
    b.add_argument("--dsv", help="also write delimiter-separated values here")
    b.add_argument("--delimiter", default=";")
    b.set_defaults(func=cmd_bench_table)
    b = bsub.add_parser("list", help="list experiments and their data files")
    b.add_argument("--configs", action="store_true", help="also print the pinned settings")
    b.set_defaults(func=cmd_bench_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
