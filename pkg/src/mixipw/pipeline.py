"""Full model fit: treatment model, per-arm mixture fits, canonical form."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, ModelParams, TreatmentSlice, VersionStructure, add_intercept
from .em import EmConfig, EmTrace, canonicalize, e_step, em_fit
from .errors import InputError
from .logit import LogitFit, SoftLabelProblem, fit_multinomial_logit
from .seeding import TAG_TREATMENT_ARM, child_seed


@dataclass(frozen=True)
class PipelineFit:
    """Everything the estimators need: canonical parameters, per-arm slices,
    responsibilities evaluated at the canonical parameters, and diagnostics."""

    params: ModelParams
    slices: tuple[TreatmentSlice, ...]
    responsibilities: tuple[np.ndarray, ...]
    traces: tuple[EmTrace, ...]
    treatment_fit: LogitFit | None


def fit_pipeline(data: Dataset, versions: VersionStructure, cfg: EmConfig) -> PipelineFit:
    """Fit the treatment model and every arm's mixture, then canonicalize.

    Arm t's EM seed derives deterministically from (cfg.seed, t), so arms can
    be fit in any order with identical results.
    """
    n_arms = data.n_treatments
    if versions.n_treatments != n_arms:
        raise InputError(
            f"version structure covers {versions.n_treatments} arms but data has {n_arms}"
        )
    if n_arms > 1:
        problem = SoftLabelProblem.from_labels(add_intercept(data.covariates), data.treatments, n_arms)
        treatment_fit = fit_multinomial_logit(problem)
        treatment_coefs = treatment_fit.coefficients
    else:
        treatment_fit = None
        treatment_coefs = np.zeros((1, data.p + 1))

    slices = []
    mixtures = []
    resps = []
    traces = []
    for t in range(n_arms):
        slice_ = TreatmentSlice.from_dataset(data, t)
        arm_cfg = replace(cfg, seed=child_seed(cfg.seed, TAG_TREATMENT_ARM, t))
        mix, _, trace = em_fit(slice_, versions[t], arm_cfg)
        mix = canonicalize(mix)
        slices.append(slice_)
        mixtures.append(mix)
        resps.append(e_step(slice_, mix))
        traces.append(trace)

    params = ModelParams(treatment_coefs, tuple(mixtures))
    return PipelineFit(params, tuple(slices), tuple(resps), tuple(traces), treatment_fit)
