"""Pure-numpy kernel implementations.

Reference semantics for the hot numeric loops. The numba backend in
``_kernels_numba`` mirrors these functions exactly; results may differ only in
floating-point summation order.
"""
from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def mixture_stats(gate_logits, mu, y, sigma2):
    """Responsibilities and observed log-likelihood for one treatment slice.

    Parameters are per-unit gating logits (n, K), per-unit component means
    (n, K), outcomes (n,), and component variances (K,). Returns
    ``(resp, loglik, bad_row)`` where ``bad_row`` is the first row whose
    mixture density underflowed to zero (-1 when none did).
    """
    gmax = gate_logits.max(axis=1, keepdims=True)
    z = gate_logits - gmax
    log_pi = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_f = -0.5 * (LOG_2PI + np.log(sigma2)) - (y[:, None] - mu) ** 2 / (2.0 * sigma2)
    joint = log_pi + log_f
    jmax = joint.max(axis=1)
    finite = np.isfinite(jmax)
    if not finite.all():
        return np.empty_like(joint), np.nan, int(np.flatnonzero(~finite)[0])
    norm = jmax + np.log(np.exp(joint - jmax[:, None]).sum(axis=1))
    resp = np.exp(joint - norm[:, None])
    return resp, float(norm.sum()), -1


def softlogit_value(x, w, coef, ridge):
    """Penalized soft-label multinomial log-likelihood only (line-search probe)."""
    logits = x @ coef.T
    lmax = logits.max(axis=1, keepdims=True)
    z = logits - lmax
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    value = float(np.sum(np.where(w > 0.0, w, 0.0) * np.where(w > 0.0, logp, 0.0)))
    return value - 0.5 * ridge * float(np.sum(coef[1:] ** 2))


def softlogit_stats(x, w, coef, ridge):
    """Penalized objective, gradient, Hessian of a soft-label multinomial logit.

    ``coef`` is the full (K, d) matrix including the fixed zero reference row;
    gradient and Hessian cover the free rows 1..K-1, flattened class-major.
    """
    m, d = x.shape
    k = coef.shape[0]
    logits = x @ coef.T
    lmax = logits.max(axis=1, keepdims=True)
    z = logits - lmax
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    p = ez / denom
    logp = z - np.log(denom)
    value = float(np.sum(np.where(w > 0.0, w, 0.0) * np.where(w > 0.0, logp, 0.0)))
    value -= 0.5 * ridge * float(np.sum(coef[1:] ** 2))

    resid = w - p
    grad = np.empty((k - 1) * d)
    for a in range(1, k):
        grad[(a - 1) * d : a * d] = x.T @ resid[:, a] - ridge * coef[a]

    hess = np.zeros(((k - 1) * d, (k - 1) * d))
    for a in range(1, k):
        for b in range(a, k):
            wab = p[:, a] * ((1.0 if a == b else 0.0) - p[:, b])
            block = -(x * wab[:, None]).T @ x
            hess[(a - 1) * d : a * d, (b - 1) * d : b * d] = block
            if b != a:
                hess[(b - 1) * d : b * d, (a - 1) * d : a * d] = block.T
    hess[np.diag_indices_from(hess)] -= ridge
    return value, grad, hess


def wls_moments(x, w, y):
    """Weighted normal-equation pieces: A = X'diag(w)X, b = X'(w*y)."""
    xw = x * w[:, None]
    return xw.T @ x, x.T @ (w * y)


def weighted_rss(x, w, y, beta):
    """Weighted residual sum of squares sum_i w_i (y_i - x_i beta)^2."""
    r = y - x @ beta
    return float(np.sum(w * r * r))
