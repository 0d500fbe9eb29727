"""The three strategies that produce a binary mask over the head's final
weight matrix: sigma-thresholding of the weights themselves, learned
additive edits thresholded by magnitude, and directly learned mask
logits with Gumbel-sigmoid relaxation.

Mask bit semantics: 1 = frozen/specialize, 0 = tunable/reuse.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import OptimizerState, sigmoid
from .data import FeatureDataset
from .errors import ConfigError, FormatError, NumericError
from .model import MlpHead, TrainConfig, weight_stats
from .rng import RngStream

MSMK_MAGIC = b"MSMK"
MSMK_VERSION = 1

STRATEGIES = ("naive", "editor", "binary")
MASK_LOGIT_INIT = 2.0  # keep-probability ~0.88 at start of mask training


@dataclass
class WeightMask:
    """Per-weight binary freeze decision with provenance."""

    bits: np.ndarray  # same shape as W, values {0, 1}
    strategy: str
    seed: int = 0
    config_digest: str = ""

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if not np.isin(self.bits, (0, 1)).all():
            raise ConfigError("mask bits must be 0 or 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")

    @property
    def frozen_fraction(self) -> float:
        return float(self.bits.mean())


def mask_sparsity(mask: WeightMask):
    """(frozen_fraction, reuse_fraction); exact counts, sums to 1."""
    frozen = float(mask.bits.mean())
    return frozen, 1.0 - frozen


def naive_mask(W: np.ndarray, seed: int = 0,
               config_digest: str = "") -> WeightMask:
    """Freeze weights strictly beyond one std of the layer's mean.

    A degenerate layer (std 0) yields the all-zeros mask because the
    inequalities are strict.
    """
    stats = weight_stats(W)
    bits = (W > stats.mean + stats.std) | (W < stats.mean - stats.std)
    return WeightMask(bits.astype(np.uint8), "naive", seed, config_digest)


def learn_editor_delta(head: MlpHead, source_ds: FeatureDataset,
                       config: TrainConfig, rng: RngStream) -> np.ndarray:
    """Learn an additive edit to the final W on the source domain.

    Objective per batch: mean CE with (W + delta) minus
    lambda_edit * mean|delta|, optimized over delta only; W, b (and any
    hidden layer) stay fixed. Entries are clamped to [-c, c] after every
    step; default c = 5 * max|W| keeps the objective bounded.
    """
    config.validate(min_epochs=0)
    if config.lambda_edit < 0:
        raise ConfigError("lambda_edit must be >= 0")
    clamp = config.delta_clamp
    if clamp is None:
        clamp = 5.0 * float(np.max(np.abs(head.W)))
    W = np.ascontiguousarray(head.W)
    b = np.ascontiguousarray(head.b)
    delta = np.zeros_like(W)
    opt = OptimizerState(kind=config.optimizer,
                         learning_rate=config.learning_rate)
    feats = np.ascontiguousarray(head.hidden_forward(source_ds.features))
    labels = source_ds.labels
    n = len(source_ds)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            X = np.ascontiguousarray(feats[idx])
            y = np.ascontiguousarray(labels[idx])
            loss, grad = kernels.editor_batch_grad(
                W, b, delta, X, y, config.lambda_edit)
            if not np.isfinite(loss):
                raise NumericError(f"editor objective diverged at epoch "
                                   f"{epoch}")
            opt.step({"delta": delta}, {"delta": grad})
            np.clip(delta, -clamp, clamp, out=delta)
    return delta


def threshold_delta(delta: np.ndarray, direction: str = "freeze-large",
                    seed: int = 0, config_digest: str = "") -> WeightMask:
    """Build a mask from |delta| by sigma-thresholding its magnitudes.

    freeze-large (default): freeze entries whose magnitude is strictly
    more than one std above the mean magnitude. freeze-small: freeze
    entries strictly more than one std below it.
    """
    if direction not in ("freeze-large", "freeze-small"):
        raise ConfigError(f"unknown direction {direction!r}")
    a = np.abs(np.asarray(delta, dtype=np.float64))
    stats = weight_stats(a)
    if direction == "freeze-large":
        bits = a > stats.mean + stats.std
    else:
        bits = a < stats.mean - stats.std
    return WeightMask(bits.astype(np.uint8), "editor", seed, config_digest)


def learn_binary_mask(head: MlpHead, source_ds: FeatureDataset,
                      config: TrainConfig, rng: RngStream) -> np.ndarray:
    """Learn mask logits with Gumbel-sigmoid sampling on the source
    domain.

    Per batch, K independent mask samples are drawn per weight; each
    forwards as W * mask element-wise. Loss = mean CE over the K samples
    plus alpha_sparsity * mean(sigmoid(logits)); only the logits receive
    gradients. Returns the final logits (harden with `harden_mask`).
    """
    config.validate(min_epochs=0)
    if config.alpha_sparsity < 0:
        raise ConfigError("alpha_sparsity must be >= 0")
    W = np.ascontiguousarray(head.W)
    b = np.ascontiguousarray(head.b)
    logits_m = np.full_like(W, MASK_LOGIT_INIT)
    opt = OptimizerState(kind=config.optimizer,
                         learning_rate=config.learning_rate)
    feats = np.ascontiguousarray(head.hidden_forward(source_ds.features))
    labels = source_ds.labels
    n = len(source_ds)
    k = config.masks_per_batch
    hard = config.forward_mask == "hard"
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            X = np.ascontiguousarray(feats[idx])
            y = np.ascontiguousarray(labels[idx])
            noise = rng.uniform_clamped((k,) + W.shape)
            loss, grad = kernels.mask_batch_grad(
                W, b, logits_m, X, y, noise, config.temperature,
                config.alpha_sparsity, hard)
            if not np.isfinite(loss):
                raise NumericError(f"mask objective diverged at epoch "
                                   f"{epoch}")
            opt.step({"logits": logits_m}, {"logits": grad})
    return logits_m


def harden_mask(logits: np.ndarray, seed: int = 0,
                config_digest: str = "") -> WeightMask:
    """Deterministic readout: bit = 1 iff sigmoid(logit) > 0.5, i.e.
    logit > 0 (strict, so logit 0 reads as reuse)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericError("mask logits must be finite")
    bits = (logits > 0.0).astype(np.uint8)
    return WeightMask(bits, "binary", seed, config_digest)


def expected_keep_fraction(logits: np.ndarray) -> float:
    """Mean keep-probability sigmoid(logit); the quantity the sparsity
    penalty pushes down."""
    return float(np.mean(sigmoid(np.asarray(logits, dtype=np.float64))))


_STRATEGY_CODES = {name: i for i, name in enumerate(STRATEGIES)}


def serialize_mask(mask: WeightMask) -> bytes:
    buf = io.BytesIO()
    buf.write(MSMK_MAGIC)
    digest = mask.config_digest.encode("utf-8")
    rows, cols = mask.bits.shape
    buf.write(struct.pack("<IIIBQI", MSMK_VERSION, rows, cols,
                          _STRATEGY_CODES[mask.strategy], mask.seed,
                          len(digest)))
    buf.write(digest)
    buf.write(np.packbits(mask.bits.ravel()).tobytes())
    return buf.getvalue()


def deserialize_mask(data: bytes) -> WeightMask:
    def need(offset, count, what):
        if offset + count > len(data):
            raise FormatError(
                f"truncated mask file: needed {count} bytes for {what} at "
                f"byte offset {offset}"
            )

    need(0, 4, "magic")
    if data[:4] != MSMK_MAGIC:
        raise FormatError("bad magic at byte offset 0 (expected 'MSMK')")
    header_fmt = "<IIIBQI"
    need(4, struct.calcsize(header_fmt), "header")
    version, rows, cols, strat_code, seed, digest_len = struct.unpack_from(
        header_fmt, data, 4)
    if version != MSMK_VERSION:
        raise FormatError(f"unsupported mask version {version}")
    if strat_code >= len(STRATEGIES):
        raise FormatError(f"invalid strategy code {strat_code}")
    off = 4 + struct.calcsize(header_fmt)
    need(off, digest_len, "config digest")
    digest = data[off:off + digest_len].decode("utf-8")
    off += digest_len
    nbits = rows * cols
    nbytes = (nbits + 7) // 8
    need(off, nbytes, "packed bits")
    packed = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=off)
    off += nbytes
    if off != len(data):
        raise FormatError(f"trailing bytes at byte offset {off}")
    bits = np.unpackbits(packed, count=nbits).reshape(rows, cols)
    return WeightMask(bits, STRATEGIES[strat_code], seed, digest)


def save_mask(mask: WeightMask, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_mask(mask))


def load_mask(path) -> WeightMask:
    with open(path, "rb") as f:
        return deserialize_mask(f.read())
