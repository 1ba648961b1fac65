"""Reading delimiter-separated data and preparing it for fitting.

Preprocessing follows a fixed order: drop rows with missing cells in any
declared column; flag rare categories (proportion at or below the threshold
within at least one treatment arm, computed in a single pass before any
category-driven row removal) and drop their rows; standardize numeric
covariates to mean zero and unit population variance using post-drop
statistics; one-hot encode categoricals with the most frequent category as the
omitted reference. Treatment labels are mapped to dense integers in
first-appearance order at ingest time.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InputError, ParseError

MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan", "na", "N/A", "NULL", "null"})
ROLE_NAMES = ("outcome", "treatment", "numeric", "categorical")


@dataclass(frozen=True)
class ColumnRoles:
    """Declared roles: one outcome column, one treatment column, and an
    ordered list of (name, kind) covariates with kind numeric or categorical."""

    outcome: str
    treatment: str
    covariates: tuple

    def __post_init__(self):
        names = [self.outcome, self.treatment] + [name for name, _ in self.covariates]
        if len(set(names)) != len(names):
            raise InputError("role declarations reuse a column name")
        if not self.covariates:
            raise InputError("need at least one covariate column")
        for name, kind in self.covariates:
            if kind not in ("numeric", "categorical"):
                raise InputError(f"covariate {name!r} has unknown kind {kind!r}")


def read_roles(path) -> ColumnRoles:
    """Parse a roles file: one `column = role` line per column, roles being
    outcome, treatment, numeric, or categorical; # starts a comment."""
    outcome = None
    treatment = None
    covariates = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected `column = role`, got {raw.strip()!r}")
            column, role = (part.strip() for part in line.split("=", 1))
            if not column or role not in ROLE_NAMES:
                raise ParseError(f"{path}:{lineno}: role must be one of {ROLE_NAMES}, got {role!r}")
            if role == "outcome":
                if outcome is not None:
                    raise ParseError(f"{path}:{lineno}: duplicate outcome declaration")
                outcome = column
            elif role == "treatment":
                if treatment is not None:
                    raise ParseError(f"{path}:{lineno}: duplicate treatment declaration")
                treatment = column
            else:
                covariates.append((column, role))
    if outcome is None or treatment is None:
        raise ParseError(f"{path}: roles file must declare an outcome and a treatment column")
    return ColumnRoles(outcome, treatment, tuple(covariates))


@dataclass(frozen=True)
class RawTable:
    """Parsed rows (still strings) with dense treatment labels attached."""

    header: tuple
    rows: tuple
    line_numbers: tuple
    roles: ColumnRoles
    treatment_levels: tuple

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [row[j] for row in self.rows]


def ingest(path, roles: ColumnRoles, delimiter: str = ",") -> RawTable:
    """Read a delimited text file with a header row and validate it against
    the declared roles."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise ParseError(f"{path}: duplicate column names in header")
        declared = [roles.outcome, roles.treatment] + [name for name, _ in roles.covariates]
        missing = [name for name in declared if name not in header]
        if missing:
            raise InputError(f"{path}: declared columns absent from header: {missing}")
        rows = []
        line_numbers = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append(tuple(row))
            line_numbers.append(lineno)
    if not rows:
        raise InputError(f"{path}: no data rows")

    t_col = header.index(roles.treatment)
    levels = []
    for row in rows:
        cell = row[t_col]
        if cell not in MISSING_TOKENS and cell not in levels:
            levels.append(cell)
    if len(levels) < 2:
        raise InputError(f"{path}: need at least 2 treatment levels, found {levels}")
    return RawTable(header, tuple(rows), tuple(line_numbers), roles, tuple(levels))


@dataclass(frozen=True)
class PreprocessReport:
    """What preprocessing did: drop counts, rare categories with their
    per-arm proportions, standardization constants, one-hot encodings, and
    the design column names in order."""

    n_input: int
    n_dropped_missing: int
    n_dropped_rare: int
    rare_categories: dict
    standardization: dict
    encodings: dict
    feature_names: tuple
    treatment_levels: tuple


def _parse_float(cell: str, column: str, lineno: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse {cell!r} in column {column!r} as a number") from None


def preprocess(table: RawTable, rare_threshold: float = 0.05):
    """Apply the fixed preprocessing order; returns (Dataset, PreprocessReport)."""
    if not 0.0 <= rare_threshold < 1.0:
        raise InputError(f"rare_threshold must lie in [0, 1), got {rare_threshold}")
    roles = table.roles
    cols = {name: table.header.index(name) for name in
            [roles.outcome, roles.treatment] + [name for name, _ in roles.covariates]}

    declared = list(cols.values())
    kept = [i for i, row in enumerate(table.rows)
            if all(row[j] not in MISSING_TOKENS for j in declared)]
    n_dropped_missing = table.n_rows - len(kept)
    if not kept:
        raise InputError("no complete-case rows remain")

    level_index = {level: k for k, level in enumerate(table.treatment_levels)}
    labels = np.array([level_index[table.rows[i][cols[roles.treatment]]] for i in kept])
    n_arms = len(table.treatment_levels)
    arm_counts = np.bincount(labels, minlength=n_arms)

    rare_categories: dict = {}
    rare_rows = np.zeros(len(kept), dtype=bool)
    for name, kind in roles.covariates:
        if kind != "categorical":
            continue
        values = [table.rows[i][cols[name]] for i in kept]
        for category in sorted(set(values)):
            hits = np.array([value == category for value in values])
            props = np.array([
                hits[labels == t].sum() / arm_counts[t] if arm_counts[t] else 0.0
                for t in range(n_arms)
            ])
            if (props <= rare_threshold).any():
                rare_categories.setdefault(name, {})[category] = tuple(float(p) for p in props)
                rare_rows |= hits
    keep2 = [i for i, flagged in zip(kept, rare_rows) if not flagged]
    n_dropped_rare = int(rare_rows.sum())
    if not keep2:
        raise InputError("rare-category removal dropped every row")
    labels = labels[~rare_rows]

    outcomes = np.array([
        _parse_float(table.rows[i][cols[roles.outcome]], roles.outcome, table.line_numbers[i])
        for i in keep2
    ])

    columns = []
    feature_names = []
    standardization: dict = {}
    encodings: dict = {}
    for name, kind in roles.covariates:
        if kind == "numeric":
            raw = np.array([
                _parse_float(table.rows[i][cols[name]], name, table.line_numbers[i])
                for i in keep2
            ])
            mean = float(raw.mean())
            sd = float(raw.std())
            if sd == 0.0:
                raise InputError(f"numeric covariate {name!r} has zero variance after preprocessing")
            standardization[name] = (mean, sd)
            columns.append((raw - mean) / sd)
            feature_names.append(name)
        else:
            values = [table.rows[i][cols[name]] for i in keep2]
            levels = sorted(set(values))
            counts = {level: values.count(level) for level in levels}
            # tie on counts goes to the lexicographically smallest level
            reference = sorted(levels, key=lambda level: (-counts[level], level))[0]
            encodings[name] = {"reference": reference, "levels": tuple(levels)}
            for level in levels:
                if level == reference:
                    continue
                columns.append(np.array([1.0 if value == level else 0.0 for value in values]))
                feature_names.append(f"{name}={level}")
    if not columns:
        raise InputError("no covariate columns survived preprocessing")

    data = Dataset(outcomes, labels, np.column_stack(columns))
    report = PreprocessReport(
        table.n_rows, n_dropped_missing, n_dropped_rare, rare_categories,
        standardization, encodings, tuple(feature_names), table.treatment_levels,
    )
    return data, report
