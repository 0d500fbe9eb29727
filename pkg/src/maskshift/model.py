"""The classifier head over fixed feature vectors: parameter container,
training loop, accuracy evaluation, weight statistics, and the MSHD
binary serialization.

One training engine (`run_training`) backs source training, unmasked
fine-tuning, and masked fine-tuning so that the zero-mask path is
bit-identical to the unmasked path under equal seeds.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .core import OptimizerState
from .data import FeatureDataset
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    NumericError,
)
from .rng import RngStream

MSHD_MAGIC = b"MSHD"
MSHD_VERSION = 1

SNAP_SOURCE_INIT = "source-init"
SNAP_SOURCE_FINAL = "source-final"


@dataclass
class TrainConfig:
    """Hyper-parameters for head training, mask learning, and
    fine-tuning."""

    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    lambda_edit: float = 0.0
    alpha_sparsity: float = 0.0
    temperature: float = 1.0
    masks_per_batch: int = 4
    forward_mask: str = "soft"  # soft | hard
    depth: int = 1
    hidden_dim: int = 256
    delta_clamp: float | None = None  # None -> 5 * max|W|
    freeze_bias: bool = False
    random_init_std: float = 0.1

    def validate(self, min_epochs: int = 1):
        # mask learning tolerates 0 epochs (logits/delta stay at init)
        if self.epochs < min_epochs:
            raise ConfigError(f"epochs must be >= {min_epochs}")
        if self.masks_per_batch < 1:
            raise ConfigError("masks_per_batch must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.lambda_edit < 0 or self.alpha_sparsity < 0:
            raise ConfigError("penalty coefficients must be >= 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.forward_mask not in ("soft", "hard"):
            raise ConfigError(f"unknown forward_mask {self.forward_mask!r}")
        if self.depth not in (1, 2):
            raise ConfigError("depth must be 1 or 2")
        if self.depth == 2 and self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ParamSnapshot:
    """Immutable copy of head parameters at a named point in training."""

    tag: str
    params: dict  # name -> array (read-only copies)

    @staticmethod
    def capture(tag: str, params: dict) -> "ParamSnapshot":
        frozen = {}
        for name, arr in params.items():
            c = np.array(arr, dtype=np.float64, copy=True)
            c.setflags(write=False)
            frozen[name] = c
        return ParamSnapshot(tag, frozen)


@dataclass
class MlpHead:
    """Final-layer parameters W, b, with an optional hidden layer.

    Only W (the final linear map) is ever masked; b and any hidden-layer
    parameters sit outside the mask.
    """

    W: np.ndarray  # (num_classes, in_dim)
    b: np.ndarray  # (num_classes,)
    num_classes: int
    feature_dim: int
    depth: int = 1
    W1: np.ndarray | None = None  # (hidden_dim, feature_dim)
    b1: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)
    seed: int = 0
    config_digest: str = ""

    @property
    def hidden_dim(self) -> int:
        return 0 if self.W1 is None else self.W1.shape[0]

    def params(self) -> dict:
        out = {"W": self.W, "b": self.b}
        if self.depth == 2:
            out["W1"] = self.W1
            out["b1"] = self.b1
        return out

    def hidden_forward(self, X: np.ndarray) -> np.ndarray:
        """Features seen by the final linear layer."""
        if self.depth == 1:
            return X
        return np.maximum(X @ self.W1.T + self.b1, 0.0)

    def forward_batch(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.feature_dim:
            raise DimensionError(
                f"feature dim {X.shape[1]} != head dim {self.feature_dim}"
            )
        return self.hidden_forward(X) @ self.W.T + self.b

    def copy(self) -> "MlpHead":
        return MlpHead(
            W=self.W.copy(), b=self.b.copy(),
            num_classes=self.num_classes, feature_dim=self.feature_dim,
            depth=self.depth,
            W1=None if self.W1 is None else self.W1.copy(),
            b1=None if self.b1 is None else self.b1.copy(),
            snapshots=dict(self.snapshots),
            seed=self.seed, config_digest=self.config_digest,
        )


def init_head(feature_dim: int, num_classes: int, config: TrainConfig,
              rng: RngStream) -> MlpHead:
    config.validate()
    if config.depth == 2:
        h = config.hidden_dim
        W1 = rng.normal((h, feature_dim), std=1.0 / np.sqrt(feature_dim))
        b1 = np.zeros(h)
        W = rng.normal((num_classes, h), std=1.0 / np.sqrt(h))
    else:
        W1 = b1 = None
        W = rng.normal((num_classes, feature_dim),
                       std=1.0 / np.sqrt(feature_dim))
    b = np.zeros(num_classes)
    return MlpHead(W=W, b=b, num_classes=num_classes,
                   feature_dim=feature_dim, depth=config.depth,
                   W1=W1, b1=b1, seed=rng.seed)


def run_training(head: MlpHead, dataset: FeatureDataset,
                 config: TrainConfig, rng: RngStream,
                 mask_bits: np.ndarray | None = None,
                 frozen_W: np.ndarray | None = None) -> list:
    """Mini-batch training of the head on `dataset`, in place.

    When mask_bits is given, gradient entries of W at bit-1 positions are
    zeroed before every optimizer step and those entries are restored to
    frozen_W afterwards (belt and braces against optimizer-state leaks).
    Returns per-epoch mean loss.
    """
    config.validate()
    if len(dataset) == 0:
        raise DataError("dataset is empty")
    if dataset.feature_dim != head.feature_dim:
        raise DimensionError(
            f"dataset dim {dataset.feature_dim} != head dim "
            f"{head.feature_dim}"
        )
    if mask_bits is not None:
        if mask_bits.shape != head.W.shape:
            raise DimensionError(
                f"mask shape {mask_bits.shape} != W shape {head.W.shape}"
            )
        tunable = (mask_bits == 0).astype(np.float64)
        frozen_idx = mask_bits != 0

    params = head.params()
    if config.freeze_bias:
        params = {k: v for k, v in params.items() if k != "b"}
    opt = OptimizerState(kind=config.optimizer,
                         learning_rate=config.learning_rate)
    X_all = dataset.features
    y_all = dataset.labels
    n = len(dataset)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            X = np.ascontiguousarray(X_all[idx])
            y = np.ascontiguousarray(y_all[idx])
            m = len(idx)
            if head.depth == 2:
                h_pre = X @ head.W1.T + head.b1
                h = np.maximum(h_pre, 0.0)
            else:
                h = X
            logits = h @ head.W.T + head.b
            loss_sum, gl = kernels.batch_ce_grad(
                np.ascontiguousarray(logits), y)
            epoch_loss += loss_sum
            grads = {"W": gl.T @ h / m, "b": gl.sum(axis=0) / m}
            if head.depth == 2:
                g_h = (gl @ head.W) * (h_pre > 0)
                grads["W1"] = g_h.T @ X / m
                grads["b1"] = g_h.sum(axis=0) / m
            if mask_bits is not None:
                grads["W"] = grads["W"] * tunable
            opt.step(params, {k: grads[k] for k in params})
            if mask_bits is not None and frozen_W is not None:
                head.W[frozen_idx] = frozen_W[frozen_idx]
        mean_loss = epoch_loss / n
        if not np.isfinite(mean_loss):
            raise NumericError(f"training diverged at epoch {epoch}")
        history.append(mean_loss)
    return history


def train_head(dataset: FeatureDataset, config: TrainConfig,
               rng: RngStream):
    """Train a fresh head on a source domain.

    Captures the source-init snapshot before the first step and the
    source-final snapshot after the last; returns (head, loss_history).
    """
    config.validate()
    if len(dataset) == 0:
        raise DataError("dataset is empty")
    head = init_head(dataset.feature_dim, dataset.num_classes, config,
                     rng.derive(0))
    head.snapshots[SNAP_SOURCE_INIT] = ParamSnapshot.capture(
        SNAP_SOURCE_INIT, head.params())
    history = run_training(head, dataset, config, rng.derive(1))
    head.snapshots[SNAP_SOURCE_FINAL] = ParamSnapshot.capture(
        SNAP_SOURCE_FINAL, head.params())
    return head, history


def evaluate_accuracy(head: MlpHead, dataset: FeatureDataset) -> float:
    """Fraction of samples whose argmax logit matches the label; argmax
    ties break to the lowest class index."""
    if len(dataset) == 0:
        raise DataError("dataset is empty")
    logits = head.forward_batch(dataset.features)
    pred = np.argmax(logits, axis=1)
    return float(np.mean(pred == dataset.labels))


@dataclass(frozen=True)
class WeightStats:
    mean: float
    std: float  # population standard deviation
    bin_counts: np.ndarray
    bin_edges: np.ndarray


def weight_stats(W: np.ndarray, bins: int = 20) -> WeightStats:
    """Mean, population std, and an equal-width histogram over
    [min, max]."""
    values = np.asarray(W, dtype=np.float64).ravel()
    if values.size < 2:
        raise DataError("weight_stats needs at least 2 entries")
    mean = float(values.mean())
    std = float(values.std())  # ddof=0
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        hi = lo + 1.0  # single occupied bin for constant input
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return WeightStats(mean, std, counts, edges)


def _pack_params(buf, head: MlpHead):
    if head.depth == 2:
        buf.write(head.W1.astype("<f8").tobytes())
        buf.write(head.b1.astype("<f8").tobytes())
    buf.write(head.W.astype("<f8").tobytes())
    buf.write(head.b.astype("<f8").tobytes())


def _param_shapes(depth, num_classes, feature_dim, hidden_dim):
    shapes = []
    if depth == 2:
        shapes += [("W1", (hidden_dim, feature_dim)), ("b1", (hidden_dim,))]
        in_dim = hidden_dim
    else:
        in_dim = feature_dim
    shapes += [("W", (num_classes, in_dim)), ("b", (num_classes,))]
    return shapes


def serialize_head(head: MlpHead) -> bytes:
    buf = io.BytesIO()
    buf.write(MSHD_MAGIC)
    digest = head.config_digest.encode("utf-8")
    buf.write(struct.pack("<IBIIIQI", MSHD_VERSION, head.depth,
                          head.num_classes, head.feature_dim,
                          head.hidden_dim, head.seed, len(digest)))
    buf.write(digest)
    _pack_params(buf, head)
    tags = sorted(head.snapshots)
    buf.write(struct.pack("<B", len(tags)))
    for tag in tags:
        snap = head.snapshots[tag]
        t = tag.encode("utf-8")
        buf.write(struct.pack("<B", len(t)))
        buf.write(t)
        for name, _ in _param_shapes(head.depth, head.num_classes,
                                     head.feature_dim, head.hidden_dim):
            buf.write(snap.params[name].astype("<f8").tobytes())
    return buf.getvalue()


def deserialize_head(data: bytes) -> MlpHead:
    def need(offset, count, what):
        if offset + count > len(data):
            raise FormatError(
                f"truncated head file: needed {count} bytes for {what} at "
                f"byte offset {offset}"
            )

    need(0, 4, "magic")
    if data[:4] != MSHD_MAGIC:
        raise FormatError("bad magic at byte offset 0 (expected 'MSHD')")
    header_fmt = "<IBIIIQI"
    need(4, struct.calcsize(header_fmt), "header")
    (version, depth, num_classes, feature_dim, hidden_dim, seed,
     digest_len) = struct.unpack_from(header_fmt, data, 4)
    if version != MSHD_VERSION:
        raise FormatError(f"unsupported head version {version}")
    if depth not in (1, 2):
        raise FormatError(f"invalid depth {depth}")
    off = 4 + struct.calcsize(header_fmt)
    need(off, digest_len, "config digest")
    digest = data[off:off + digest_len].decode("utf-8")
    off += digest_len

    shapes = _param_shapes(depth, num_classes, feature_dim, hidden_dim)

    def read_params(off):
        out = {}
        for name, shape in shapes:
            count = int(np.prod(shape))
            need(off, 8 * count, f"parameter {name}")
            arr = np.frombuffer(data, dtype="<f8", count=count,
                                offset=off).reshape(shape).copy()
            out[name] = arr
            off += 8 * count
        return out, off

    params, off = read_params(off)
    need(off, 1, "snapshot count")
    (snap_count,) = struct.unpack_from("<B", data, off)
    off += 1
    snapshots = {}
    for _ in range(snap_count):
        need(off, 1, "snapshot tag length")
        (tlen,) = struct.unpack_from("<B", data, off)
        off += 1
        need(off, tlen, "snapshot tag")
        tag = data[off:off + tlen].decode("utf-8")
        off += tlen
        snap_params, off = read_params(off)
        snapshots[tag] = ParamSnapshot.capture(tag, snap_params)
    if off != len(data):
        raise FormatError(f"trailing bytes at byte offset {off}")
    return MlpHead(
        W=params["W"], b=params["b"], num_classes=num_classes,
        feature_dim=feature_dim, depth=depth,
        W1=params.get("W1"), b1=params.get("b1"),
        snapshots=snapshots, seed=seed, config_digest=digest,
    )


def save_head(head: MlpHead, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_head(head))


def load_head(path) -> MlpHead:
    with open(path, "rb") as f:
        return deserialize_head(f.read())
