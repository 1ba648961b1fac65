"""Serialization of estimate reports.

Two formats: "tabular" is a comma-separated table with one row per estimand
and columns (kind, t, v, t2, v2, estimate, ci_lo, ci_hi); "structured" is JSON
nesting the same rows plus version shares, preprocessing and EM summaries, and
bootstrap metadata. Floats are written with 17 significant digits, so both
formats round-trip losslessly.
"""
from __future__ import annotations

import csv
import dataclasses
import json

from .estimators import EstimandReport
from .errors import InputError, ParseError

FORMATS = ("tabular", "structured")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _interval(report: EstimandReport, key):
    if report.intervals is None:
        return None
    return report.intervals.get(key)


def _rows(report: EstimandReport) -> list:
    rows = []
    for (t, v), value in sorted(report.version_effects.items()):
        rows.append(("version_effect", t, v, None, None, value, _interval(report, ("version_effect", t, v))))
    for t, value in sorted(report.treatment_effects.items()):
        rows.append(("treatment_effect", t, None, None, None, value, _interval(report, ("treatment_effect", t))))
    for ((t, v), (t2, v2)), value in sorted(report.contrasts.items()):
        rows.append(("contrast", t, v, t2, v2, value, _interval(report, ("contrast", t, v, v2))))
    return rows


def _plain(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    raise InputError(f"cannot serialize attachment of type {type(obj).__name__}")


def _trace_summary(trace) -> dict:
    if isinstance(trace, dict):
        return dict(trace)
    return {
        "n_iterations": trace.n_iterations,
        "converged": trace.converged,
        "restart_index": trace.restart_index,
        "final_loglik": float(trace.loglik_path[-1]) if trace.loglik_path else None,
    }


def emit_report(report: EstimandReport, format: str, path) -> None:
    """Write the report to path in the requested format."""
    if format not in FORMATS:
        raise InputError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "tabular":
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["kind", "t", "v", "t2", "v2", "estimate", "ci_lo", "ci_hi"])
            for kind, t, v, t2, v2, value, ci in _rows(report):
                writer.writerow([
                    kind,
                    "" if t is None else t,
                    "" if v is None else v,
                    "" if t2 is None else t2,
                    "" if v2 is None else v2,
                    _fmt(value),
                    "" if ci is None else _fmt(ci[0]),
                    "" if ci is None else _fmt(ci[1]),
                ])
        return
    payload = {
        "n_used": report.n_used,
        "floor": report.floor,
        "estimates": [
            {
                "kind": kind, "t": t, "v": v, "t2": t2, "v2": v2,
                "estimate": float(value),
                "ci_lo": None if ci is None else float(ci[0]),
                "ci_hi": None if ci is None else float(ci[1]),
            }
            for kind, t, v, t2, v2, value, ci in _rows(report)
        ],
        "version_shares": {
            str(t): [float(s) for s in shares] for t, shares in sorted(report.version_shares.items())
        },
        "preprocess": _plain(report.preprocess),
        "em_traces": None if report.em_traces is None else [_trace_summary(tr) for tr in report.em_traces],
        "bootstrap": _plain(report.bootstrap_meta),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _cell_int(cell: str):
    return None if cell == "" else int(cell)


def load_report(path, format: str) -> EstimandReport:
    """Read a report back; inverse of emit_report for either format."""
    if format not in FORMATS:
        raise InputError(f"format must be one of {FORMATS}, got {format!r}")
    effects = {}
    arm_effects = {}
    contrasts = {}
    intervals = {}
    shares = {}
    n_used = 0
    floor = None
    preprocess_block = None
    trace_block = None
    bootstrap_block = None
    if format == "tabular":
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != ["kind", "t", "v", "t2", "v2", "estimate", "ci_lo", "ci_hi"]:
                raise ParseError(f"{path}: not a tabular report (header {header})")
            records = [
                {
                    "kind": row[0], "t": _cell_int(row[1]), "v": _cell_int(row[2]),
                    "t2": _cell_int(row[3]), "v2": _cell_int(row[4]),
                    "estimate": float(row[5]),
                    "ci_lo": None if row[6] == "" else float(row[6]),
                    "ci_hi": None if row[7] == "" else float(row[7]),
                }
                for row in reader if row
            ]
    else:
        with open(path, encoding="utf-8") as handle:
            try:
                payload = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid structured report: {exc}") from None
        records = payload["estimates"]
        n_used = int(payload["n_used"])
        floor = payload["floor"]
        shares = {int(t): list(s) for t, s in payload.get("version_shares", {}).items()}
        preprocess_block = payload.get("preprocess")
        trace_block = payload.get("em_traces")
        bootstrap_block = payload.get("bootstrap")

    for rec in records:
        kind = rec["kind"]
        if kind == "version_effect":
            key = ("version_effect", rec["t"], rec["v"])
            effects[(rec["t"], rec["v"])] = rec["estimate"]
        elif kind == "treatment_effect":
            key = ("treatment_effect", rec["t"])
            arm_effects[rec["t"]] = rec["estimate"]
        elif kind == "contrast":
            key = ("contrast", rec["t"], rec["v"], rec["v2"])
            contrasts[((rec["t"], rec["v"]), (rec["t2"], rec["v2"]))] = rec["estimate"]
        else:
            raise ParseError(f"{path}: unknown estimand kind {kind!r}")
        if rec["ci_lo"] is not None:
            intervals[key] = (rec["ci_lo"], rec["ci_hi"])

    return EstimandReport(
        effects, arm_effects, contrasts, shares, n_used, floor,
        intervals=intervals or None,
        preprocess=preprocess_block,
        em_traces=None if trace_block is None else tuple(trace_block),
        bootstrap_meta=bootstrap_block,
    )
