"""Pure-numpy implementations of the hot training kernels.

This is the fallback backend and the semantic reference for the jitted
backend in `jitted.py`. Both expose the same functions over float64
arrays; results agree to within a few ulps (summation order differs).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def batch_ce_grad(logits: np.ndarray, labels: np.ndarray):
    """Softmax cross-entropy over a batch.

    Returns (summed loss, per-sample grad wrt logits = softmax - onehot).
    """
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    sums = exps.sum(axis=1)
    idx = np.arange(n)
    loss_sum = float(np.sum(np.log(sums) - shifted[idx, labels]))
    grad = exps / sums[:, None]
    grad[idx, labels] -= 1.0
    return loss_sum, grad


def editor_batch_grad(W, b, delta, X, y, lam):
    """Loss and gradient wrt the additive edit `delta`.

    Objective: mean CE with weights (W + delta) minus lam * mean|delta|.
    W and b are held fixed.
    """
    n = X.shape[0]
    logits = X @ (W + delta).T + b
    loss_sum, grad_logits = batch_ce_grad(logits, y)
    grad_delta = grad_logits.T @ X / n
    loss = loss_sum / n - lam * float(np.mean(np.abs(delta)))
    grad_delta -= lam * np.sign(delta) / delta.size
    return loss, grad_delta


def mask_batch_grad(W, b, mask_logits, X, y, noise, tau, alpha, hard):
    """Loss and gradient wrt mask logits for one batch of K mask samples.

    noise: (K, C, D) uniforms already clamped away from {0, 1}. For each
    sample k the mask is a Gumbel-sigmoid draw; the forward pass uses the
    soft mask, or its hardening when `hard` (straight-through: hard value
    forward, soft derivative backward). Loss is the mean CE over the K
    masked forwards plus alpha * mean(sigmoid(mask_logits)).
    """
    n = X.shape[0]
    k_count = noise.shape[0]
    g = np.log(noise) - np.log1p(-noise)
    soft = _sigmoid((mask_logits[None, :, :] + g) / tau)
    fwd = (soft > 0.5).astype(np.float64) if hard else soft

    ce_total = 0.0
    grad = np.zeros_like(mask_logits)
    for k in range(k_count):
        logits = X @ (W * fwd[k]).T + b
        loss_sum, grad_logits = batch_ce_grad(logits, y)
        ce_total += loss_sum / n
        grad += (grad_logits.T @ X / n) * W * soft[k] * (1.0 - soft[k]) / tau
    ce = ce_total / k_count
    grad /= k_count

    p = _sigmoid(mask_logits)
    loss = ce + alpha * float(p.mean())
    grad += alpha * p * (1.0 - p) / p.size
    return loss, grad
