"""Core numerical primitives: Gumbel-sigmoid sampling, softmax
cross-entropy with analytic gradients, dense linear maps, optimizer
steps, and finite-difference gradient verification.

Everything is float64 and either pure or mutating only caller-owned
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DeterminismError,
    DimensionError,
    NumericError,
)

U_EPS = 1e-12


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    t = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    return out if out.ndim else float(out)


def gumbel_sigmoid_sample(logit, temperature, rng, u=None):
    """Draw a relaxed binary sample from a logit.

    u ~ Uniform(0,1) (clamped to [1e-12, 1-1e-12]); g = log u - log(1-u)
    is logistic noise; soft = sigmoid((logit + g) / temperature) and
    hard = 1 iff soft > 0.5. Pass `u` to force the noise draw.

    d(soft)/d(logit) = soft * (1 - soft) / temperature; when the hard
    value is used in a forward pass the straight-through rule applies.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    logit = np.asarray(logit, dtype=np.float64)
    if not np.all(np.isfinite(logit)):
        raise NumericError("logit must be finite")
    if u is None:
        u = rng.uniform(logit.shape if logit.ndim else None)
    u = np.clip(np.asarray(u, dtype=np.float64), U_EPS, 1.0 - U_EPS)
    g = np.log(u) - np.log1p(-u)
    soft = sigmoid((logit + g) / temperature)
    hard = np.asarray(soft) > 0.5
    if np.ndim(soft) == 0:
        return float(soft), int(hard)
    return soft, hard.astype(np.int8)


def softmax_cross_entropy(logits, label):
    """Loss and gradient of -log softmax(logits)[label].

    Uses max-subtraction stabilization; grad = softmax(logits) - onehot.
    """
    logits = np.asarray(logits, dtype=np.float64)
    c = logits.shape[0]
    if not 0 <= label < c:
        raise IndexError(f"label {label} out of range for {c} classes")
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    s = exps.sum()
    loss = float(np.log(s) - shifted[label])
    grad = exps / s
    grad[label] -= 1.0
    return loss, grad


def linear_forward(W, b, x):
    """logits = W @ x + b."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise DimensionError(
            f"shape mismatch: W {W.shape}, b {b.shape}, x {x.shape}"
        )
    return W @ x + b


def linear_backward(W, b, x, grad_logits):
    """Gradients of the linear map: (outer(grad_logits, x), grad_logits,
    W.T @ grad_logits)."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if W.shape != (grad_logits.shape[0], x.shape[0]):
        raise DimensionError(
            f"shape mismatch: W {W.shape}, x {x.shape}, "
            f"grad_logits {grad_logits.shape}"
        )
    grad_W = np.outer(grad_logits, x)
    grad_b = grad_logits.copy()
    grad_x = W.T @ grad_logits
    return grad_W, grad_b, grad_x


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    """SGD or Adam state over a named set of parameter arrays."""

    kind: str = "adam"
    learning_rate: float = 1e-3
    step_count: int = 0
    moments: dict = field(default_factory=dict)  # name -> (m, v)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be > 0")

    def step(self, params: dict, grads: dict) -> None:
        """Update `params` in place from `grads` (same keys/shapes)."""
        self.step_count += 1
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise DimensionError(
                    f"grad shape {g.shape} != param shape {p.shape} "
                    f"for {name!r}"
                )
            if not np.all(np.isfinite(g)):
                bad = np.argwhere(~np.isfinite(g))[0]
                raise NumericError(
                    f"non-finite gradient for {name!r} at index "
                    f"{tuple(int(i) for i in bad)}"
                )
            if self.kind == "sgd":
                p -= self.learning_rate * g
                continue
            if name not in self.moments:
                self.moments[name] = (np.zeros_like(p), np.zeros_like(p))
            m, v = self.moments[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            m_hat = m / (1.0 - ADAM_BETA1**self.step_count)
            v_hat = v / (1.0 - ADAM_BETA2**self.step_count)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def optimizer_step(params: dict, grads: dict, state: OptimizerState) -> None:
    """Functional alias for OptimizerState.step (in-place update)."""
    state.step(params, grads)


def finite_difference_check(loss_fn, params, eps=1e-5):
    """Max relative error between loss_fn's analytic gradient and central
    differences.

    loss_fn(params) -> (loss, grad) must be deterministic; params is a
    1-D float64 array. Relative error per coordinate is
    |analytic - numeric| / max(1e-12, |numeric|).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    params = np.asarray(params, dtype=np.float64)
    l1, g1 = loss_fn(params)
    l2, g2 = loss_fn(params)
    if l1 != l2 or not np.array_equal(np.asarray(g1), np.asarray(g2)):
        raise DeterminismError("loss_fn is not deterministic")
    analytic = np.asarray(g1, dtype=np.float64).ravel()
    max_rel = 0.0
    flat = params.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp, _ = loss_fn(params)
        flat[i] = orig - eps
        lm, _ = loss_fn(params)
        flat[i] = orig
        numeric = (lp - lm) / (2.0 * eps)
        rel = abs(analytic[i] - numeric) / max(1e-12, abs(numeric))
        max_rel = max(max_rel, rel)
    return max_rel
