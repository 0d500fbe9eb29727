"""Numba-jitted implementations of the hot training kernels.

Same contracts as `reference.py`; see that module for semantics. All
arrays must be C-contiguous float64 (labels int64); the dispatcher in
`__init__.py` guarantees this.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def batch_ce_grad(logits, labels):
    n, c = logits.shape
    grad = np.empty((n, c))
    total = 0.0
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(c):
            e = math.exp(logits[i, j] - m)
            grad[i, j] = e
            s += e
        total += math.log(s) - (logits[i, labels[i]] - m)
        inv = 1.0 / s
        for j in range(c):
            grad[i, j] *= inv
        grad[i, labels[i]] -= 1.0
    return total, grad


@njit(cache=True)
def editor_batch_grad(W, b, delta, X, y, lam):
    n = X.shape[0]
    logits = X @ (W + delta).T
    for i in range(n):
        logits[i] += b
    loss_sum, grad_logits = batch_ce_grad(logits, y)
    grad_delta = grad_logits.T @ X / n
    abs_sum = 0.0
    c, d = delta.shape
    for i in range(c):
        for j in range(d):
            v = delta[i, j]
            abs_sum += abs(v)
            if v > 0.0:
                grad_delta[i, j] -= lam / delta.size
            elif v < 0.0:
                grad_delta[i, j] += lam / delta.size
    loss = loss_sum / n - lam * abs_sum / delta.size
    return loss, grad_delta


@njit(cache=True)
def _sigmoid_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def mask_batch_grad(W, b, mask_logits, X, y, noise, tau, alpha, hard):
    n = X.shape[0]
    k_count = noise.shape[0]
    c, d = mask_logits.shape
    grad = np.zeros((c, d))
    ce_total = 0.0
    masked_w = np.empty((c, d))
    soft = np.empty((c, d))
    for k in range(k_count):
        for i in range(c):
            for j in range(d):
                g = math.log(noise[k, i, j]) - math.log1p(-noise[k, i, j])
                s = _sigmoid_scalar((mask_logits[i, j] + g) / tau)
                soft[i, j] = s
                f = (1.0 if s > 0.5 else 0.0) if hard else s
                masked_w[i, j] = W[i, j] * f
        logits = X @ masked_w.T
        for i in range(n):
            logits[i] += b
        loss_sum, grad_logits = batch_ce_grad(logits, y)
        ce_total += loss_sum / n
        grad_mask = grad_logits.T @ X / n
        for i in range(c):
            for j in range(d):
                s = soft[i, j]
                grad[i, j] += grad_mask[i, j] * W[i, j] * s * (1.0 - s) / tau
    ce = ce_total / k_count
    for i in range(c):
        for j in range(d):
            grad[i, j] /= k_count

    p_mean = 0.0
    size = c * d
    for i in range(c):
        for j in range(d):
            p = _sigmoid_scalar(mask_logits[i, j])
            p_mean += p
            grad[i, j] += alpha * p * (1.0 - p) / size
    loss = ce + alpha * p_mean / size
    return loss, grad
