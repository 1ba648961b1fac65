"""Command-line interface.

Subcommands: fit (estimate version effects from a data file), simulate (run
the Monte Carlo study), bootstrap (fit plus percentile intervals), report
(convert a saved report between formats). Diagnostics go to stderr; outputs
go to files under --out (report conversion may write to stdout when --out is
omitted).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .data import VersionStructure
from .em import EmConfig
from .errors import InputError, MixipwError
from .estimators import attach_intervals, bootstrap, build_report
from .ingest import ingest, preprocess, read_roles
from .pipeline import fit_pipeline
from .reports import emit_report, load_report
from .simulation import SimConfig, monte_carlo, write_metrics_csv, write_replicates_csv

log = logging.getLogger("mixipw")


def _add_table_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="delimited data file with a header row")
    sub.add_argument("--roles", required=True, help="roles file mapping columns to outcome/treatment/numeric/categorical")
    sub.add_argument("--delimiter", default=",", help="cell delimiter (default comma)")
    sub.add_argument("--rare-threshold", type=float, default=0.05,
                     help="drop categories at or below this within-arm proportion (default 0.05)")


def _add_em_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--versions", required=True, help="comma-separated version counts per arm, e.g. 2,2")
    sub.add_argument("--tol", type=float, default=1e-6, help="EM stopping tolerance (default 1e-6)")
    sub.add_argument("--max-iter", type=int, default=500, help="EM iteration cap (default 500)")
    sub.add_argument("--restarts", type=int, default=10, help="EM restarts (default 10)")
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixipw",
                                     description="Version-specific treatment effects from observational data")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="fit the model and write estimates")
    _add_table_args(fit)
    _add_em_args(fit)
    fit.add_argument("--floor", type=float, default=None, help="optional propensity denominator floor in [0, 0.1)")
    fit.add_argument("--out", required=True, help="output directory")

    sim = commands.add_parser("simulate", help="run the Monte Carlo study")
    sim.add_argument("--n", type=int, required=True, help="sample size per replicate")
    sim.add_argument("--p", type=int, required=True, help="covariate dimension")
    sim.add_argument("--snr", type=float, required=True, help="signal-to-noise ratio")
    sim.add_argument("--treatments", type=int, required=True, help="number of treatment arms")
    sim.add_argument("--versions", required=True, help="comma-separated version counts per arm")
    sim.add_argument("--reps", type=int, required=True, help="number of replicates")
    sim.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sim.add_argument("--tol", type=float, default=1e-6, help="EM stopping tolerance (default 1e-6)")
    sim.add_argument("--max-iter", type=int, default=500, help="EM iteration cap (default 500)")
    sim.add_argument("--restarts", type=int, default=10, help="EM restarts (default 10)")
    sim.add_argument("--oracle", action="store_true", help="plug in the truth instead of fitting")
    sim.add_argument("--out", required=True, help="output directory")

    boot = commands.add_parser("bootstrap", help="fit plus percentile bootstrap intervals")
    _add_table_args(boot)
    _add_em_args(boot)
    boot.add_argument("--B", type=int, default=100, help="bootstrap resamples (default 100)")
    boot.add_argument("--level", type=float, default=0.95, help="interval level (default 0.95)")
    boot.add_argument("--floor", type=float, default=None, help="optional propensity denominator floor in [0, 0.1)")
    boot.add_argument("--out", required=True, help="output directory")

    conv = commands.add_parser("report", help="convert a saved report between formats")
    conv.add_argument("--in", dest="infile", required=True, help="existing report file (either format)")
    conv.add_argument("--format", required=True, choices=("tabular", "structured"), help="output format")
    conv.add_argument("--out", default=None, help="output file (stdout when omitted)")
    return parser


def _load_table(args):
    roles = read_roles(args.roles)
    table = ingest(args.data, roles, delimiter=args.delimiter)
    data, prep = preprocess(table, rare_threshold=args.rare_threshold)
    log.info("ingested %d rows -> %d usable units, %d features",
             table.n_rows, data.n, data.p)
    return data, prep


def _em_config(args) -> EmConfig:
    return EmConfig(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts, seed=args.seed)


def _write_report_files(report, out_dir: str) -> None:
    emit_report(report, "tabular", os.path.join(out_dir, "estimates.csv"))
    emit_report(report, "structured", os.path.join(out_dir, "report.json"))


def _cmd_fit(args) -> int:
    data, prep = _load_table(args)
    fit = fit_pipeline(data, VersionStructure.parse(args.versions), _em_config(args))
    report = build_report(data, fit, floor=args.floor)
    report = dataclasses.replace(report, preprocess=prep, em_traces=fit.traces)
    os.makedirs(args.out, exist_ok=True)
    _write_report_files(report, args.out)
    log.info("wrote estimates.csv and report.json to %s", args.out)
    return 0


def _cmd_simulate(args) -> int:
    versions = VersionStructure.parse(args.versions)
    if versions.n_treatments != args.treatments:
        raise InputError(f"--treatments {args.treatments} but --versions lists {versions.n_treatments} arms")
    cfg = SimConfig(
        n=args.n, p=args.p, versions=versions, snr=args.snr, reps=args.reps, seed=args.seed,
        em=EmConfig(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts),
    )
    result = monte_carlo(cfg, oracle=args.oracle)
    os.makedirs(args.out, exist_ok=True)
    write_metrics_csv(result, os.path.join(args.out, "metrics.csv"))
    write_replicates_csv(result, os.path.join(args.out, "replicates.csv"))
    log.info("wrote metrics.csv and replicates.csv to %s (%d failed replicates)",
             args.out, len(result.failed_replicates))
    return 0


def _write_bootstrap_csv(boot, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["replicate", "kind", "t", "v", "v2", "value"])
        for key, draws in boot.replicates.items():
            kind, *rest = key
            t = rest[0]
            v = rest[1] if len(rest) > 1 else ""
            v2 = rest[2] if len(rest) > 2 else ""
            for b in range(boot.n_resamples):
                if np.isfinite(draws[b]):
                    writer.writerow([b, kind, t, v, v2, f"{draws[b]:.17g}"])


def _cmd_bootstrap(args) -> int:
    data, prep = _load_table(args)
    versions = VersionStructure.parse(args.versions)
    cfg = _em_config(args)
    fit = fit_pipeline(data, versions, cfg)
    report = build_report(data, fit, floor=args.floor)
    boot = bootstrap(data, versions, cfg, n_resamples=args.B, level=args.level,
                     seed=args.seed, floor=args.floor)
    report = attach_intervals(report, boot)
    report = dataclasses.replace(report, preprocess=prep, em_traces=fit.traces)
    os.makedirs(args.out, exist_ok=True)
    _write_report_files(report, args.out)
    _write_bootstrap_csv(boot, os.path.join(args.out, "replicates.csv"))
    log.info("bootstrap done: %d resamples, %d redraws, %d failures",
             boot.n_resamples, boot.n_redraws, boot.n_failures)
    return 0


def _cmd_report(args) -> int:
    try:
        with open(args.infile, encoding="utf-8") as handle:
            json.load(handle)
        in_format = "structured"
    except json.JSONDecodeError:
        in_format = "tabular"
    report = load_report(args.infile, in_format)
    if args.out is not None:
        emit_report(report, args.format, args.out)
        return 0
    with tempfile.NamedTemporaryFile("r+", suffix=".tmp", delete=True) as handle:
        emit_report(report, args.format, handle.name)
        handle.seek(0)
        sys.stdout.write(handle.read())
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit": _cmd_fit,
        "simulate": _cmd_simulate,
        "bootstrap": _cmd_bootstrap,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (MixipwError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
