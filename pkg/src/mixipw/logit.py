"""Multinomial logistic regression with per-class soft labels.

Maximizes the weighted log-likelihood

    sum_i sum_k w_ik log softmax_k(c_k . x_i)  -  (ridge / 2) ||c_free||^2

by damped Newton with a step-halving line search. Class 0 is the reference:
its coefficient row is pinned to zero and only rows 1..K-1 are free. Soft
labels cover the hard-label case via one-hot weight rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import backend
from .errors import DegenerateClassError, InputError, NumericalError

DEGENERATE_CLASS_FRACTION = 1e-10
ARMIJO_SLOPE = 1e-4
MAX_HALVINGS = 50


@dataclass(frozen=True)
class SoftLabelProblem:
    """Design matrix plus a row-stochastic soft-label weight matrix."""

    design: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.design, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if x.ndim != 2 or w.ndim != 2:
            raise InputError("design and weights must be matrices")
        if x.shape[0] != w.shape[0]:
            raise InputError(f"{x.shape[0]} design rows but {w.shape[0]} weight rows")
        if x.shape[0] == 0:
            raise InputError("empty problem")
        if w.shape[1] < 2:
            raise InputError("need at least two classes")
        if not np.isfinite(x).all():
            raise InputError("non-finite design entries")
        if not np.isfinite(w).all():
            raise InputError("non-finite weights")
        if (w < -1e-12).any() or (w > 1.0 + 1e-12).any():
            raise InputError("weights must lie in [0, 1]")
        row_sums = w.sum(axis=1)
        worst = float(np.abs(row_sums - 1.0).max())
        if worst > 1e-9:
            raise InputError(f"weight rows must sum to 1 (worst deviation {worst:.3e})")
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_labels(cls, design: np.ndarray, labels: np.ndarray, n_classes: int | None = None) -> "SoftLabelProblem":
        """Build a one-hot problem from hard integer labels."""
        labels = np.asarray(labels)
        if n_classes is None:
            n_classes = int(labels.max()) + 1
        w = np.zeros((labels.shape[0], n_classes))
        w[np.arange(labels.shape[0]), labels] = 1.0
        return cls(design, w)

    @property
    def n_rows(self) -> int:
        return self.design.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class LogitFit:
    """Solver result; coefficients is (K, d) with row 0 identically zero,
    loglik the final penalized objective, iterations the number of accepted
    Newton updates, and objective_path the objective after each of them."""

    coefficients: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    objective_path: tuple[float, ...]


def _full_coef(problem: SoftLabelProblem, coefficients: np.ndarray | None) -> np.ndarray:
    k, d = problem.n_classes, problem.dim
    if coefficients is None:
        return np.zeros((k, d))
    c = np.array(coefficients, dtype=float)
    if c.shape != (k, d):
        raise InputError(f"coefficients shape {c.shape}, expected {(k, d)}")
    if (c[0] != 0.0).any():
        c = c - c[0]
    return np.ascontiguousarray(c)


def logit_objective(problem: SoftLabelProblem, coefficients: np.ndarray, ridge: float = 0.0) -> float:
    """Penalized soft-label log-likelihood at the given coefficients."""
    c = _full_coef(problem, coefficients)
    return float(backend.softlogit_value(problem.design, problem.weights, c, ridge))


def logit_grad_hess(problem: SoftLabelProblem, coefficients: np.ndarray, ridge: float = 0.0):
    """Gradient and Hessian of the penalized objective over the free classes.

    The gradient stacks sum_i x_i (w_ik - p_ik) - ridge c_k for k = 1..K-1;
    the Hessian is the negative Fisher information minus ridge times identity.
    """
    c = _full_coef(problem, coefficients)
    _, grad, hess = backend.softlogit_stats(problem.design, problem.weights, c, ridge)
    return grad, hess


def _newton_direction(hess: np.ndarray, grad: np.ndarray, iteration: int) -> np.ndarray:
    """Solve (-hess) step = grad, escalating diagonal damping if needed."""
    neg_h = -hess
    if not np.isfinite(neg_h).all() or not np.isfinite(grad).all():
        raise NumericalError(f"non-finite Newton system at iteration {iteration}")
    damping = 0.0
    scale = max(float(np.trace(neg_h)) / neg_h.shape[0], 1.0)
    for _ in range(8):
        try:
            factor = scipy.linalg.cho_factor(neg_h + damping * np.eye(neg_h.shape[0]), lower=True)
            return scipy.linalg.cho_solve(factor, grad)
        except scipy.linalg.LinAlgError:
            damping = max(damping * 100.0, 1e-12 * scale)
    raise NumericalError(f"Newton system not positive definite after damping at iteration {iteration}")


def fit_multinomial_logit(
    problem: SoftLabelProblem,
    tol: float = 1e-8,
    max_iter: int = 100,
    ridge: float = 1e-8,
    init: np.ndarray | None = None,
) -> LogitFit:
    """Fit the soft-label multinomial logit.

    Converges when the relative objective change drops below tol; with a
    separable problem and ridge 0 the objective keeps a relative change of
    order one forever, so the loop runs to max_iter and converged stays false.
    """
    if tol <= 0.0 or max_iter < 1 or ridge < 0.0:
        raise InputError("tol must be > 0, max_iter >= 1, ridge >= 0")
    mass = problem.weights.sum(axis=0)
    thin = mass < DEGENERATE_CLASS_FRACTION * problem.n_rows
    if thin.any():
        k = int(np.flatnonzero(thin)[0])
        raise DegenerateClassError(f"class {k} has total weight {mass[k]:.3e} over {problem.n_rows} rows")

    x, w = problem.design, problem.weights
    coef = _full_coef(problem, init)
    d = problem.dim
    value, grad, hess = backend.softlogit_stats(x, w, coef, ridge)
    path = [float(value)]
    converged = False
    accepted = 0
    for iteration in range(1, max_iter + 1):
        step = _newton_direction(hess, grad, iteration)
        slope = float(grad @ step)
        trial = coef.copy()
        alpha = 1.0
        moved = False
        for _ in range(MAX_HALVINGS):
            trial[1:] = coef[1:] + alpha * step.reshape(-1, d)
            if backend.softlogit_value(x, w, trial, ridge) >= value + ARMIJO_SLOPE * alpha * slope:
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        coef = trial
        new_value, grad, hess = backend.softlogit_stats(x, w, coef, ridge)
        path.append(float(new_value))
        accepted = iteration
        if abs(new_value - value) < tol * abs(value):
            value = new_value
            converged = True
            break
        value = new_value

    coef.setflags(write=False)
    return LogitFit(coef, float(path[-1]), accepted, converged, tuple(path))
