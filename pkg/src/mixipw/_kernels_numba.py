"""Numba kernel implementations; same contracts as ``_kernels_numpy``."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def mixture_stats(gate_logits, mu, y, sigma2):
    n, k = gate_logits.shape
    resp = np.empty((n, k))
    half_log_norm = np.empty(k)
    for v in range(k):
        half_log_norm[v] = -0.5 * (LOG_2PI + math.log(sigma2[v]))
    loglik = 0.0
    for i in range(n):
        gmax = gate_logits[i, 0]
        for v in range(1, k):
            if gate_logits[i, v] > gmax:
                gmax = gate_logits[i, v]
        gsum = 0.0
        for v in range(k):
            gsum += math.exp(gate_logits[i, v] - gmax)
        log_gsum = math.log(gsum)
        jmax = -np.inf
        for v in range(k):
            dev = y[i] - mu[i, v]
            joint = (gate_logits[i, v] - gmax - log_gsum
                     + half_log_norm[v] - dev * dev / (2.0 * sigma2[v]))
            resp[i, v] = joint
            if joint > jmax:
                jmax = joint
        if not np.isfinite(jmax):
            return resp, np.nan, i
        jsum = 0.0
        for v in range(k):
            jsum += math.exp(resp[i, v] - jmax)
        norm = jmax + math.log(jsum)
        for v in range(k):
            resp[i, v] = math.exp(resp[i, v] - norm)
        loglik += norm
    return resp, loglik, -1


@njit(cache=True)
def softlogit_value(x, w, coef, ridge):
    m, d = x.shape
    k = coef.shape[0]
    value = 0.0
    logits = np.empty(k)
    for i in range(m):
        lmax = -np.inf
        for a in range(k):
            s = 0.0
            for j in range(d):
                s += x[i, j] * coef[a, j]
            logits[a] = s
            if s > lmax:
                lmax = s
        denom = 0.0
        for a in range(k):
            denom += math.exp(logits[a] - lmax)
        log_denom = math.log(denom)
        for a in range(k):
            if w[i, a] > 0.0:
                value += w[i, a] * (logits[a] - lmax - log_denom)
    pen = 0.0
    for a in range(1, k):
        for j in range(d):
            pen += coef[a, j] * coef[a, j]
    return value - 0.5 * ridge * pen


@njit(cache=True)
def softlogit_stats(x, w, coef, ridge):
    m, d = x.shape
    k = coef.shape[0]
    nfree = (k - 1) * d
    grad = np.zeros(nfree)
    hess = np.zeros((nfree, nfree))
    value = 0.0
    logits = np.empty(k)
    p = np.empty(k)
    for i in range(m):
        lmax = -np.inf
        for a in range(k):
            s = 0.0
            for j in range(d):
                s += x[i, j] * coef[a, j]
            logits[a] = s
            if s > lmax:
                lmax = s
        denom = 0.0
        for a in range(k):
            p[a] = math.exp(logits[a] - lmax)
            denom += p[a]
        log_denom = math.log(denom)
        for a in range(k):
            p[a] /= denom
            if w[i, a] > 0.0:
                value += w[i, a] * (logits[a] - lmax - log_denom)
        for a in range(1, k):
            ra = w[i, a] - p[a]
            base_a = (a - 1) * d
            for j in range(d):
                grad[base_a + j] += x[i, j] * ra
            for b in range(a, k):
                wab = p[a] * ((1.0 if a == b else 0.0) - p[b])
                base_b = (b - 1) * d
                for j in range(d):
                    xj = x[i, j] * wab
                    for l in range(d):
                        hess[base_a + j, base_b + l] -= xj * x[i, l]
    for a in range(1, k):
        for b in range(a + 1, k):
            for j in range(d):
                for l in range(d):
                    hess[(b - 1) * d + l, (a - 1) * d + j] = hess[(a - 1) * d + j, (b - 1) * d + l]
    pen = 0.0
    for a in range(1, k):
        base_a = (a - 1) * d
        for j in range(d):
            c = coef[a, j]
            pen += c * c
            grad[base_a + j] -= ridge * c
            hess[base_a + j, base_a + j] -= ridge
    value -= 0.5 * ridge * pen
    return value, grad, hess


@njit(cache=True)
def wls_moments(x, w, y):
    m, d = x.shape
    a = np.zeros((d, d))
    b = np.zeros(d)
    for i in range(m):
        wi = w[i]
        wy = wi * y[i]
        for j in range(d):
            xj = x[i, j]
            b[j] += xj * wy
            wx = wi * xj
            for l in range(j, d):
                a[j, l] += wx * x[i, l]
    for j in range(d):
        for l in range(j + 1, d):
            a[l, j] = a[j, l]
    return a, b


@njit(cache=True)
def weighted_rss(x, w, y, beta):
    m, d = x.shape
    total = 0.0
    for i in range(m):
        pred = 0.0
        for j in range(d):
            pred += x[i, j] * beta[j]
        r = y[i] - pred
        total += w[i] * r * r
    return total
