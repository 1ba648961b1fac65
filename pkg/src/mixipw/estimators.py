"""Plug-in inverse-probability estimators and the bootstrap.

The version-specific effect estimate for arm t, version v averages
r_v(y_i, x_i) y_i / (e_t(x_i) g_v(x_i)) over the units assigned to arm t,
divided by the full sample size n: responsibilities split each treated unit
across versions, and the product of treatment and version probabilities is the
inverse weight. Arm-level effects average the version effects with weights
equal to the sample-average gating probabilities over all n units. Contrasts
are exact differences of stored estimates.

A unit whose responsibility for version v is exactly zero has a vanishing
numerator, so it contributes zero to the sum no matter how small the
propensity product is (responsibilities are proportional to the gating
probability, so both collapse together and the ratio stays bounded). The
positivity error therefore fires only when a unit with positive
responsibility faces a denominator below the underflow threshold — the case
where a contribution that matters genuinely cannot be weighted.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data import Dataset, VersionStructure
from .em import EmConfig, lexicographic_order
from .errors import (
    BootstrapFailureError,
    FitFailureError,
    InputError,
    NumericalError,
    PositivityError,
)
from .models import gating_prob_matrix, treatment_prob_matrix
from .pipeline import PipelineFit, fit_pipeline
from .seeding import TAG_BOOTSTRAP, child_rng, child_seed

DENOM_UNDERFLOW = 1e-300
MAX_FLOOR = 0.1
MAX_REDRAWS_PER_RESAMPLE = 100


def _check_floor(floor: Optional[float]) -> None:
    if floor is not None and not (0.0 <= floor < MAX_FLOOR):
        raise InputError(f"floor must lie in [0, {MAX_FLOOR}), got {floor}")


def ht_psi(data: Dataset, fit: PipelineFit, t: int, v: int, floor: Optional[float] = None) -> float:
    """Version-specific effect estimate for (t, v) with full-sample divisor."""
    _check_floor(floor)
    slice_ = fit.slices[t]
    params = fit.params
    e_t = treatment_prob_matrix(data.covariates[slice_.indices], params.treatment_coefs)[:, t]
    g_v = gating_prob_matrix(data.covariates[slice_.indices], params.mixture(t).gating_coefs)[:, v]
    denom = e_t * g_v
    resp_v = fit.responsibilities[t][:, v]
    needed = resp_v > 0.0
    if floor is not None:
        denom = np.maximum(denom, floor)
    else:
        bad = needed & (denom < DENOM_UNDERFLOW)
        if bad.any():
            unit = int(slice_.indices[np.flatnonzero(bad)[0]])
            raise PositivityError(f"propensity denominator underflowed for unit {unit}; set a floor")
    terms = np.zeros(resp_v.shape[0])
    if needed.any():
        terms[needed] = resp_v[needed] * slice_.outcomes[needed] / denom[needed]
    return float(np.sum(terms) / data.n)


def version_shares(data: Dataset, fit: PipelineFit, t: int) -> np.ndarray:
    """Sample-average gating probabilities of arm t over all n units."""
    return gating_prob_matrix(data.covariates, fit.params.mixture(t).gating_coefs).mean(axis=0)


def psi_treatment(data: Dataset, fit: PipelineFit, t: int, floor: Optional[float] = None) -> float:
    """Arm-level effect: version effects averaged with the arm's version shares."""
    shares = version_shares(data, fit, t)
    return float(sum(shares[v] * ht_psi(data, fit, t, v, floor=floor) for v in range(shares.shape[0])))


@dataclass(frozen=True)
class EstimandReport:
    """All estimates from one fit, with optional attachments.

    Keys: version effects by (t, v); arm effects by t; within-arm contrasts by
    ((t, v), (t, v2)) meaning "effect of version v2 minus version v". The
    optional intervals dict is keyed like ``bootstrap`` replicate keys.
    """

    version_effects: dict
    treatment_effects: dict
    contrasts: dict
    version_shares: dict
    n_used: int
    floor: Optional[float] = None
    intervals: Optional[dict] = None
    preprocess: Optional[object] = None
    em_traces: Optional[tuple] = None
    bootstrap_meta: Optional[dict] = None


def contrast(report: EstimandReport, first: tuple, second: tuple) -> float:
    """Exact difference of two stored version effects: second minus first."""
    for pair in (first, second):
        if pair not in report.version_effects:
            raise KeyError(f"unknown estimand {pair}")
    return report.version_effects[second] - report.version_effects[first]


def build_report(data: Dataset, fit: PipelineFit, floor: Optional[float] = None) -> EstimandReport:
    """Compute every version effect, arm effect, and within-arm contrast."""
    _check_floor(floor)
    effects = {}
    shares = {}
    arm_effects = {}
    contrasts = {}
    for t in range(fit.params.n_treatments):
        n_versions = fit.params.mixture(t).n_versions
        for v in range(n_versions):
            effects[(t, v)] = ht_psi(data, fit, t, v, floor=floor)
        s = version_shares(data, fit, t)
        shares[t] = s
        arm_effects[t] = float(sum(s[v] * effects[(t, v)] for v in range(n_versions)))
        for v in range(n_versions):
            for v2 in range(v + 1, n_versions):
                contrasts[((t, v), (t, v2))] = effects[(t, v2)] - effects[(t, v)]
    return EstimandReport(effects, arm_effects, contrasts, shares, data.n, floor)


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile bootstrap output: per-estimand replicate vectors of length B
    (NaN at replicates whose refit failed) and the derived intervals."""

    n_resamples: int
    level: float
    replicates: dict
    intervals: dict
    n_redraws: int
    n_failures: int
    order_violations: int


def _report_values(report: EstimandReport) -> dict:
    values = {}
    for (t, v), val in report.version_effects.items():
        values[("version_effect", t, v)] = val
    for t, val in report.treatment_effects.items():
        values[("treatment_effect", t)] = val
    for ((t, v), (_, v2)), val in report.contrasts.items():
        values[("contrast", t, v, v2)] = val
    return values


def percentile_interval(draws: np.ndarray, level: float) -> tuple:
    """Equal-tailed percentile interval with linear interpolation."""
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(draws, [tail, 100.0 - tail], method="linear")
    return float(lo), float(hi)


def bootstrap(
    data: Dataset,
    versions: VersionStructure,
    cfg: EmConfig,
    n_resamples: int = 100,
    level: float = 0.95,
    seed: int = 0,
    floor: Optional[float] = None,
) -> BootstrapResult:
    """Nonparametric bootstrap of the full pipeline.

    Each resample redraws rows with replacement (redrawn, and counted, when a
    treatment label is missing), refits everything from a child seed keyed by
    the replicate index, and records all estimands after canonicalization.
    More than 20% failed refits aborts.
    """
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    if n_resamples < 1:
        raise InputError("need at least one resample")
    _check_floor(floor)

    labels = np.arange(data.n_treatments)
    replicate_rows = []
    n_redraws = 0
    n_failures = 0
    order_violations = 0
    keys = None
    for b in range(n_resamples):
        rng = child_rng(seed, TAG_BOOTSTRAP, b, 0)
        for _ in range(MAX_REDRAWS_PER_RESAMPLE):
            idx = rng.integers(0, data.n, data.n)
            if np.isin(labels, data.treatments[idx]).all():
                break
            n_redraws += 1
        else:
            raise BootstrapFailureError(
                f"replicate {b}: no resample contained every treatment after "
                f"{MAX_REDRAWS_PER_RESAMPLE} redraws"
            )
        resample = Dataset(data.outcomes[idx], data.treatments[idx], data.covariates[idx])
        try:
            fit = fit_pipeline(resample, versions, replace(cfg, seed=child_seed(seed, TAG_BOOTSTRAP, b, 1)))
            values = _report_values(build_report(resample, fit, floor=floor))
        except (FitFailureError, NumericalError, PositivityError):
            n_failures += 1
            replicate_rows.append(None)
            continue
        for t in range(fit.params.n_treatments):
            mix = fit.params.mixture(t)
            if lexicographic_order(mix.expert_coefs, mix.expert_scales) != list(range(mix.n_versions)):
                order_violations += 1
        if keys is None:
            keys = list(values)
        replicate_rows.append(values)
    if n_failures > 0.2 * n_resamples:
        raise BootstrapFailureError(
            f"{n_failures} of {n_resamples} bootstrap refits failed (limit 20%)"
        )

    replicates = {key: np.full(n_resamples, np.nan) for key in keys}
    for b, values in enumerate(replicate_rows):
        if values is not None:
            for key in keys:
                replicates[key][b] = values[key]
    intervals = {}
    for key, draws in replicates.items():
        finite = draws[np.isfinite(draws)]
        intervals[key] = percentile_interval(finite, level)
    return BootstrapResult(n_resamples, level, replicates, intervals, n_redraws, n_failures, order_violations)


def attach_intervals(report: EstimandReport, boot: BootstrapResult) -> EstimandReport:
    """Copy of the report carrying the bootstrap intervals and metadata."""
    meta = {
        "n_resamples": boot.n_resamples,
        "level": boot.level,
        "n_redraws": boot.n_redraws,
        "n_failures": boot.n_failures,
    }
    return replace(report, intervals=dict(boot.intervals), bootstrap_meta=meta)
