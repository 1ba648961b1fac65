"""Synthetic data generator and the Monte Carlo study harness.

The generating process draws covariates from a standard normal, assigns
treatments and latent versions by softmax models on the raw covariates (no
intercept, unlike the estimation models, which carry one), builds potential
outcomes as linear functions of the covariates plus a version-specific effect
on the ladder 1.0, 2.0, 3.0, ... in lexicographic (arm, version) order, and
adds Gaussian noise scaled so that the realized signal-to-noise ratio matches
the configuration. Latent versions and the potential-outcome table are
returned for oracle checks only; the fitting path consumes the observed
dataset alone.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, MixtureParams, ModelParams, TreatmentSlice, VersionStructure
from .em import EmConfig, EmTrace, e_step, lexicographic_order
from .errors import FitFailureError, InputError, NumericalError, PositivityError
from .estimators import build_report
from .models import softmax
from .pipeline import PipelineFit, fit_pipeline
from .seeding import TAG_DGP, TAG_MC_FIT, child_rng, child_seed


@dataclass(frozen=True)
class SimConfig:
    """Study configuration: sample size, covariate dimension, version
    structure, signal-to-noise ratio, replicate count, master seed."""

    n: int
    p: int
    versions: VersionStructure
    snr: float
    reps: int = 1
    seed: int = 0
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.reps < 1:
            raise InputError("n, p and reps must be >= 1")
        if self.snr <= 0.0:
            raise InputError(f"snr must be positive, got {self.snr}")
        if self.seed < 0:
            raise InputError("seed must be non-negative")
        recommended = 2 * (self.versions.n_treatments - 1) + 2 * max(c - 1 for c in self.versions)
        if self.p < recommended:
            warnings.warn(
                f"p={self.p} below the recommended {recommended} for this version structure; "
                "coefficient indices will wrap and may collide",
                stacklevel=2,
            )


@dataclass(frozen=True)
class SimTruth:
    """True generating parameters, all without intercepts; noise_scale is the
    realized per-draw value and stays None until a dataset is drawn."""

    treatment_coefs: np.ndarray
    gating_coefs: tuple
    expert_coefs: tuple
    effects: tuple
    noise_scale: float | None = None


@dataclass(frozen=True)
class SimDraw:
    """Oracle block of one draw: latent versions, potential-outcome table per
    arm, and the truth completed with the realized noise scale. Never fed to
    the fitting path."""

    versions: np.ndarray
    potentials: tuple
    truth: SimTruth


def build_truth(cfg: SimConfig) -> SimTruth:
    """Deterministic truth for the configuration.

    Treatment coefficients put +2/-2 on a cyclic pair of coordinates per
    non-reference arm; version gating puts +2/+2 on a pair offset by
    2(arms - 1); expert slopes are the unit-norm constant vector plus a 0.2
    bump on coordinate v for version v.
    """
    p = cfg.p
    n_arms = cfg.versions.n_treatments
    treatment_coefs = np.zeros((n_arms, p))
    used_by_treatment = set()
    for t in range(1, n_arms):
        i1, i2 = (2 * t - 2) % p, (2 * t - 1) % p
        treatment_coefs[t, i1] += 2.0
        treatment_coefs[t, i2] += -2.0
        used_by_treatment.update((i1, i2))
    offset = 2 * (n_arms - 1)
    gating = []
    collisions = set()
    for t in range(n_arms):
        g = np.zeros((cfg.versions[t], p))
        for v in range(1, cfg.versions[t]):
            j1, j2 = (offset + 2 * v - 2) % p, (offset + 2 * v - 1) % p
            g[v, j1] += 2.0
            g[v, j2] += 2.0
            collisions.update({j1, j2} & used_by_treatment)
        gating.append(g)
    if collisions:
        warnings.warn(
            f"treatment and version coefficient indices collide at {sorted(collisions)}; increase p",
            stacklevel=2,
        )
    base = np.ones(p) / np.sqrt(p)
    experts = []
    effects = []
    level = 1.0
    for t in range(n_arms):
        b = np.empty((cfg.versions[t], p))
        e = np.empty(cfg.versions[t])
        for v in range(cfg.versions[t]):
            if v >= p:
                warnings.warn(f"version {v} exceeds p={p}; perturbation coordinate wraps", stacklevel=2)
            bump = np.zeros(p)
            bump[v % p] = 0.2
            b[v] = base + bump
            e[v] = level
            level += 1.0
        experts.append(b)
        effects.append(e)
    return SimTruth(treatment_coefs, tuple(gating), tuple(experts), tuple(effects))


def _categorical_rows(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    draw = (u[:, None] > cum).sum(axis=1)
    return np.minimum(draw, probs.shape[1] - 1)


def simulate_dataset(truth: SimTruth, cfg: SimConfig, seed: int):
    """Draw one dataset. Returns (Dataset, SimDraw).

    Draw order is fixed (covariates, treatment uniforms, version uniforms,
    noise), so results are bitwise reproducible for a given seed.
    """
    rng = child_rng(seed, TAG_DGP)
    n, p = cfg.n, cfg.p
    x = rng.standard_normal((n, p))
    u_treat = rng.random(n)
    u_version = rng.random(n)
    noise = rng.standard_normal(n)

    treatments = _categorical_rows(softmax(x @ truth.treatment_coefs.T), u_treat)
    versions = np.zeros(n, dtype=np.int64)
    potentials = []
    noiseless = np.empty(n)
    for t in range(cfg.versions.n_treatments):
        table = x @ truth.expert_coefs[t].T + truth.effects[t][None, :]
        potentials.append(table)
        rows = treatments == t
        if rows.any():
            v = _categorical_rows(softmax(x[rows] @ truth.gating_coefs[t].T), u_version[rows])
            versions[rows] = v
            noiseless[rows] = table[rows, v]
    scale = float(noiseless.std())
    sigma = scale / cfg.snr
    y = noiseless + sigma * noise
    data = Dataset(y, treatments, x)
    return data, SimDraw(versions, tuple(potentials), replace(truth, noise_scale=sigma))


def truth_as_params(truth: SimTruth) -> ModelParams:
    """Embed the truth into the estimation parameterization: zero intercepts
    on the softmax models, the version effect as the expert intercept, the
    realized noise scale as every expert's scale."""
    if truth.noise_scale is None:
        raise InputError("truth has no realized noise scale; draw a dataset first")
    sigma = max(truth.noise_scale, 1e-8)
    zeta = np.hstack([np.zeros((truth.treatment_coefs.shape[0], 1)), truth.treatment_coefs])
    mixtures = []
    for t in range(truth.treatment_coefs.shape[0]):
        gating = np.hstack([np.zeros((truth.gating_coefs[t].shape[0], 1)), truth.gating_coefs[t]])
        expert = np.hstack([truth.effects[t][:, None], truth.expert_coefs[t]])
        mixtures.append(MixtureParams(gating, expert, np.full(expert.shape[0], sigma)))
    return ModelParams(zeta, tuple(mixtures))


def oracle_fit(data: Dataset, realized_truth: SimTruth) -> PipelineFit:
    """PipelineFit built from the truth instead of EM: responsibilities are the
    exact posteriors under the true parameters."""
    params = truth_as_params(realized_truth)
    slices = []
    resps = []
    traces = []
    for t in range(params.n_treatments):
        slice_ = TreatmentSlice.from_dataset(data, t)
        slices.append(slice_)
        resps.append(e_step(slice_, params.mixture(t)))
        traces.append(EmTrace((), 0, True, 0))
    return PipelineFit(params, tuple(slices), tuple(resps), tuple(traces), None)


@dataclass(frozen=True)
class MetricsRow:
    """One within-arm contrast cell of the study output table."""

    p: int
    snr: float
    n: int
    t: int
    v: int
    v2: int
    bias: float
    sd: float
    failures: int


@dataclass(frozen=True)
class MonteCarloResult:
    """Study output: the metrics table plus raw per-replicate estimates
    (NaN rows for failed replicates) for downstream tidy exports."""

    rows: tuple
    effect_keys: tuple
    effect_draws: np.ndarray
    contrast_keys: tuple
    contrast_draws: np.ndarray
    true_effects: dict
    failed_replicates: tuple
    config: SimConfig


def monte_carlo(cfg: SimConfig, oracle: bool = False) -> MonteCarloResult:
    """Run the replicated study.

    Each replicate draws a dataset from a child seed, fits the full pipeline
    (or plugs in the truth when oracle=True), and records canonical-order
    version effects and within-arm contrasts. Truth and estimates are both in
    canonical component order, so labels align by construction. Failed
    replicates are dropped from the metrics and counted; more than 10% aborts.
    """
    truth = build_truth(cfg)
    effect_keys = tuple((t, v) for t in range(cfg.versions.n_treatments) for v in range(cfg.versions[t]))
    contrast_keys = tuple(
        (t, v, v2)
        for t in range(cfg.versions.n_treatments)
        for v in range(cfg.versions[t])
        for v2 in range(v + 1, cfg.versions[t])
    )
    effect_draws = np.full((cfg.reps, len(effect_keys)), np.nan)
    contrast_draws = np.full((cfg.reps, len(contrast_keys)), np.nan)
    failed = []
    true_effects = {}
    for m in range(cfg.reps):
        data, draw = simulate_dataset(truth, cfg, child_seed(cfg.seed, TAG_DGP, m))
        if not true_effects:
            params_star = truth_as_params(draw.truth)
            for t in range(cfg.versions.n_treatments):
                mix = params_star.mixture(t)
                order = lexicographic_order(mix.expert_coefs, mix.expert_scales)
                sorted_effects = truth.effects[t][order]
                for v in range(cfg.versions[t]):
                    true_effects[(t, v)] = float(sorted_effects[v])
        try:
            if oracle:
                fit = oracle_fit(data, draw.truth)
            else:
                fit = fit_pipeline(data, cfg.versions, replace(cfg.em, seed=child_seed(cfg.seed, TAG_MC_FIT, m)))
            report = build_report(data, fit)
        except (FitFailureError, NumericalError, PositivityError):
            failed.append(m)
            continue
        for j, (t, v) in enumerate(effect_keys):
            effect_draws[m, j] = report.version_effects[(t, v)]
        for j, (t, v, v2) in enumerate(contrast_keys):
            contrast_draws[m, j] = report.contrasts[((t, v), (t, v2))]
    if len(failed) > 0.1 * cfg.reps:
        raise FitFailureError(f"{len(failed)} of {cfg.reps} replicates failed (limit 10%)")

    rows = []
    for j, (t, v, v2) in enumerate(contrast_keys):
        draws = contrast_draws[np.isfinite(contrast_draws[:, j]), j]
        delta_star = true_effects[(t, v2)] - true_effects[(t, v)]
        bias = float(np.mean(draws - delta_star))
        sd = float(np.sqrt(np.mean((draws - draws.mean()) ** 2)))
        rows.append(MetricsRow(cfg.p, cfg.snr, cfg.n, t, v, v2, bias, sd, len(failed)))
    return MonteCarloResult(
        tuple(rows), effect_keys, effect_draws, contrast_keys, contrast_draws,
        true_effects, tuple(failed), cfg,
    )


def write_metrics_csv(result: MonteCarloResult, path) -> None:
    """Metrics table with columns (p, snr, n, t, v, v2, bias, sd, failures)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["p", "snr", "n", "t", "v", "v2", "bias", "sd", "failures"])
        for row in result.rows:
            writer.writerow([
                row.p, f"{row.snr:.17g}", row.n, row.t, row.v, row.v2,
                f"{row.bias:.17g}", f"{row.sd:.17g}", row.failures,
            ])


def write_replicates_csv(result: MonteCarloResult, path) -> None:
    """Tidy per-replicate records: one row per (replicate, estimand)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["replicate", "kind", "t", "v", "v2", "value"])
        for m in range(result.config.reps):
            for j, (t, v) in enumerate(result.effect_keys):
                if np.isfinite(result.effect_draws[m, j]):
                    writer.writerow([m, "version_effect", t, v, "", f"{result.effect_draws[m, j]:.17g}"])
            for j, (t, v, v2) in enumerate(result.contrast_keys):
                if np.isfinite(result.contrast_draws[m, j]):
                    writer.writerow([m, "contrast", t, v, v2, f"{result.contrast_draws[m, j]:.17g}"])
