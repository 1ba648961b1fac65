"""Model evaluators: treatment probabilities, version gating, expert densities.

All evaluators work on the intercepted design (1, x); coefficient matrices have
one row per class and the reference row pinned to zero by convention, although
softmax shift invariance means a nonzero reference row changes nothing.
"""
from __future__ import annotations

import math

import numpy as np

from .data import ModelParams, PropensityPair, add_intercept
from .errors import InputError, ParameterError

LOG_2PI = math.log(2.0 * math.pi)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def _check_unit(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim - 1:
        raise InputError(f"covariate vector has length {x.shape}, expected {dim - 1}")
    if not np.isfinite(x).all():
        raise InputError("non-finite covariate vector")
    return x


def treatment_probs(x: np.ndarray, treatment_coefs: np.ndarray) -> np.ndarray:
    """Softmax treatment-assignment probabilities for one unit."""
    coefs = np.asarray(treatment_coefs, dtype=float)
    x = _check_unit(x, coefs.shape[1])
    return softmax(coefs @ add_intercept(x))


def gating_probs(x: np.ndarray, gating_coefs: np.ndarray) -> np.ndarray:
    """Softmax version-membership probabilities for one unit within an arm."""
    coefs = np.asarray(gating_coefs, dtype=float)
    x = _check_unit(x, coefs.shape[1])
    return softmax(coefs @ add_intercept(x))


def expert_logdensity(y: float, x: np.ndarray, expert_coefs: np.ndarray, scale: float) -> float:
    """Gaussian log-density of outcome y under one version's linear expert."""
    coefs = np.asarray(expert_coefs, dtype=float)
    if scale <= 0.0:
        raise ParameterError(f"expert scale must be positive, got {scale}")
    x = _check_unit(x, coefs.shape[0])
    dev = float(y) - float(coefs @ add_intercept(x))
    var = float(scale) ** 2
    return -0.5 * (LOG_2PI + math.log(var)) - dev * dev / (2.0 * var)


def propensity_pair(x: np.ndarray, params: ModelParams, t: int, v: int) -> PropensityPair:
    """Treatment and version probability for one unit at the given labels."""
    e = treatment_probs(x, params.treatment_coefs)
    g = gating_probs(x, params.mixture(t).gating_coefs)
    return PropensityPair(float(e[t]), float(g[v]))


def treatment_prob_matrix(covariates: np.ndarray, treatment_coefs: np.ndarray) -> np.ndarray:
    """Treatment probabilities for every row of a covariate matrix."""
    return softmax(add_intercept(covariates) @ np.asarray(treatment_coefs, dtype=float).T)


def gating_prob_matrix(covariates: np.ndarray, gating_coefs: np.ndarray) -> np.ndarray:
    """Version probabilities for every row of a covariate matrix."""
    return softmax(add_intercept(covariates) @ np.asarray(gating_coefs, dtype=float).T)
