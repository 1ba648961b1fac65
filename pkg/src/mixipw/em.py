"""EM fitting of one treatment arm's mixture of linear experts.

Each arm is fit separately on its own slice of the data. The E-step computes
version responsibilities in log space; the M-step has a closed weighted-least-
squares form for each expert and delegates the gating update to the soft-label
multinomial solver, warm-started at the previous gating coefficients and run
with the solver's tiny numerical ridge, which keeps near-separable
responsibility patterns from driving the gating coefficients to infinity.
The quantity EM provably ascends is then the ridge-penalized observed-data
log-likelihood, so the internal descent detector monitors that; the reported
trace keeps the plain observed-data values. Restarts
draw jittered initializations from deterministic child seeds; the winner is
the restart with the highest final log-likelihood, ties going to the lowest
restart index. Fitted components are put in canonical form by sorting on the
(expert coefficients, scale) key and re-zeroing the gating reference row.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import backend
from .data import MixtureParams, TreatmentSlice
from .errors import CollapsedComponentError, FitFailureError, InputError, InternalError, NumericalError
from .logit import SoftLabelProblem, fit_multinomial_logit
from .seeding import TAG_RESTART, child_rng

WLS_DAMPING = 1e-10
VARIANCE_FLOOR = 1e-8
COLLAPSE_FRACTION = 1e-10
GATING_RIDGE = 1e-8
ASCENT_BUG_TOL = 1e-6
EXTRA_INIT_ATTEMPTS = 3


@dataclass(frozen=True)
class EmConfig:
    """Stopping and restart policy for one EM fit."""

    tol: float = 1e-6
    max_iter: int = 500
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0.0:
            raise InputError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1 or self.restarts < 1:
            raise InputError("max_iter and restarts must be >= 1")
        if self.seed < 0:
            raise InputError("seed must be non-negative")


@dataclass(frozen=True)
class EmTrace:
    """Diagnostics of the winning run: log-likelihood after initialization and
    after each iteration, the iteration count, the convergence flag, and the
    index of the winning restart."""

    loglik_path: tuple[float, ...]
    n_iterations: int
    converged: bool
    restart_index: int


def _mixture_stats(slice_: TreatmentSlice, mix: MixtureParams):
    gate_logits = np.ascontiguousarray(slice_.design @ mix.gating_coefs.T)
    mu = np.ascontiguousarray(slice_.design @ mix.expert_coefs.T)
    var = np.ascontiguousarray(mix.expert_scales**2)
    resp, loglik, bad = backend.mixture_stats(gate_logits, mu, slice_.outcomes, var)
    if bad >= 0:
        raise NumericalError(f"all mixture components underflowed for unit index {int(slice_.indices[bad])}")
    return resp, loglik


def e_step(slice_: TreatmentSlice, mix: MixtureParams) -> np.ndarray:
    """Posterior version responsibilities, one row per unit in the slice."""
    return _mixture_stats(slice_, mix)[0]


def observed_loglik(slice_: TreatmentSlice, mix: MixtureParams) -> float:
    """Observed-data log-likelihood of the slice: sum_i log sum_v pi_v f_v."""
    return _mixture_stats(slice_, mix)[1]


def m_step_expert(slice_: TreatmentSlice, resp_v: np.ndarray):
    """Closed-form weighted update of one expert: damped WLS coefficients and
    the responsibility-weighted residual variance (floored)."""
    resp_v = np.ascontiguousarray(resp_v, dtype=float)
    mass = float(resp_v.sum())
    if mass < COLLAPSE_FRACTION * slice_.n_units:
        raise CollapsedComponentError(f"component mass {mass:.3e} over {slice_.n_units} units")
    a, b = backend.wls_moments(slice_.design, resp_v, slice_.outcomes)
    a = a + WLS_DAMPING * np.eye(slice_.dim)
    beta = np.linalg.solve(a, b)
    rss = backend.weighted_rss(slice_.design, resp_v, slice_.outcomes, beta)
    return beta, max(rss / mass, VARIANCE_FLOOR)


def m_step_gating(slice_: TreatmentSlice, resp: np.ndarray, init: np.ndarray | None = None) -> np.ndarray:
    """Gating update: soft-label multinomial fit on the responsibilities with
    the numerical ridge, warm-started when previous coefficients are given."""
    if resp.shape[1] == 1:
        return np.zeros((1, slice_.dim))
    problem = SoftLabelProblem(slice_.design, resp)
    return np.array(fit_multinomial_logit(problem, ridge=GATING_RIDGE, init=init).coefficients)


def initial_params(slice_: TreatmentSlice, n_versions: int, rng: np.random.Generator) -> MixtureParams:
    """OLS-anchored initialization: every expert starts at the pooled OLS fit
    plus Gaussian jitter scaled to 0.5 residual SD / sqrt(design dim); scales
    start at the residual SD and gating coefficients at zero."""
    beta_ols, *_ = np.linalg.lstsq(slice_.design, slice_.outcomes, rcond=None)
    resid = slice_.outcomes - slice_.design @ beta_ols
    resid_sd = float(np.sqrt(np.mean(resid**2)))
    sigma0 = max(resid_sd, 1e-4)
    if n_versions == 1:
        beta = beta_ols[None, :].copy()
    else:
        jitter = 0.5 * resid_sd / np.sqrt(slice_.dim)
        beta = beta_ols[None, :] + jitter * rng.standard_normal((n_versions, slice_.dim))
    return MixtureParams(np.zeros((n_versions, slice_.dim)), beta, np.full(n_versions, sigma0))


def em_run(slice_: TreatmentSlice, init: MixtureParams, tol: float, max_iter: int):
    """One EM run from a fixed initialization.

    Returns (params, responsibilities, loglik_path, n_iterations, converged);
    responsibilities are evaluated at the returned parameters. A decrease of
    the gating-ridge-penalized log-likelihood beyond the bug tolerance raises
    InternalError; the path and the stopping rule use the plain value.
    """
    mix = init
    resp, loglik = _mixture_stats(slice_, mix)
    path = [loglik]
    penalized = loglik - 0.5 * GATING_RIDGE * float(np.sum(mix.gating_coefs**2))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        n_versions = mix.n_versions
        betas = np.empty((n_versions, slice_.dim))
        scales = np.empty(n_versions)
        for v in range(n_versions):
            beta, var = m_step_expert(slice_, resp[:, v])
            betas[v] = beta
            scales[v] = np.sqrt(var)
        gating = m_step_gating(slice_, resp, init=mix.gating_coefs)
        mix = MixtureParams(gating, betas, scales)
        resp, new_loglik = _mixture_stats(slice_, mix)
        new_penalized = new_loglik - 0.5 * GATING_RIDGE * float(np.sum(gating**2))
        if new_penalized < penalized - ASCENT_BUG_TOL:
            raise InternalError(
                f"penalized log-likelihood decreased from {penalized:.12g} to {new_penalized:.12g} "
                f"at iteration {iterations}"
            )
        penalized = new_penalized
        path.append(new_loglik)
        if abs(new_loglik - path[-2]) < tol:
            converged = True
            break
    return mix, resp, path, iterations, converged


def em_fit(slice_: TreatmentSlice, n_versions: int, cfg: EmConfig):
    """Multi-restart EM fit of one treatment arm.

    Returns (params, responsibilities, trace). Restarts whose components
    collapse are redrawn up to three extra times from fresh child seeds; if
    every restart fails, raises FitFailureError.
    """
    if n_versions < 1:
        raise InputError(f"need at least one version, got {n_versions}")
    if slice_.n_units <= slice_.dim * n_versions:
        warnings.warn(
            f"slice has {slice_.n_units} units for {n_versions} versions of dimension "
            f"{slice_.dim}; recommend more than {slice_.dim * n_versions}",
            stacklevel=2,
        )
    restarts = cfg.restarts if n_versions > 1 else 1
    best = None
    last_error: Exception | None = None
    for r in range(restarts):
        outcome = None
        for attempt in range(1 + EXTRA_INIT_ATTEMPTS):
            init = initial_params(slice_, n_versions, child_rng(cfg.seed, TAG_RESTART, r, attempt))
            try:
                outcome = em_run(slice_, init, cfg.tol, cfg.max_iter)
                break
            except NumericalError as err:
                last_error = err
        if outcome is None:
            continue
        if best is None or outcome[2][-1] > best[1][2][-1]:
            best = (r, outcome)
    if best is None:
        raise FitFailureError(f"all {restarts} restarts failed; last error: {last_error}")
    r, (mix, resp, path, iterations, converged) = best
    trace = EmTrace(tuple(path), iterations, converged, r)
    return mix, resp, trace


def lexicographic_order(expert_coefs: np.ndarray, expert_scales: np.ndarray) -> list[int]:
    """Stable component order under the (coefficients, scale) lexicographic key."""
    keys = [tuple(expert_coefs[v]) + (float(expert_scales[v]),) for v in range(expert_coefs.shape[0])]
    order = sorted(range(len(keys)), key=keys.__getitem__)
    for a, b in zip(order, order[1:]):
        if keys[a] == keys[b]:
            warnings.warn(f"identical component keys for versions {a} and {b}; keeping pre-sort order", stacklevel=3)
    return order


def canonicalize(mix: MixtureParams) -> MixtureParams:
    """Canonical component labeling: sort versions by the lexicographic key on
    (expert coefficients, scale), then re-zero the gating reference row by
    subtracting the post-sort row 0 from every gating row. Idempotent."""
    order = lexicographic_order(mix.expert_coefs, mix.expert_scales)
    gating = mix.gating_coefs[order]
    gating = gating - gating[0]
    return MixtureParams(gating, mix.expert_coefs[order], mix.expert_scales[order])
