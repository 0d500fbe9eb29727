"""Feature datasets: binary/CSV ingestion, stratified splitting, and a
seeded synthetic two-domain generator with controllable shift.

Binary layout (little-endian), shared with the extractor frontend:
magic "FTDS", u32 version=1, u32 feature_dim, u32 num_classes,
u32 domain-name byte length + UTF-8 name, u64 sample count, then per
sample a u32 label followed by feature_dim float64 values.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .rng import RngStream

FTDS_MAGIC = b"FTDS"
FTDS_VERSION = 1


@dataclass
class FeatureDataset:
    """Fixed-dimension feature vectors with integer labels and a domain
    tag."""

    features: np.ndarray  # (n, feature_dim) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    domain_name: str

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels length must match sample count")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise DataError("labels must lie in [0, num_classes)")

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class SynthConfig:
    """Parameters of the synthetic two-domain generator."""

    feature_dim: int = 32
    num_classes: int = 4
    samples_per_class: int = 200
    center_scale: float = 1.0
    noise_std: float = 0.3
    shift_kind: str = "rotation"  # rotation | mean-offset | both
    shift_magnitude: float = 0.0
    seed: int = 0

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.samples_per_class < 10:
            raise ConfigError("samples_per_class must be >= 10")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.shift_kind not in ("rotation", "mean-offset", "both"):
            raise ConfigError(f"unknown shift_kind {self.shift_kind!r}")
        if self.noise_std < 0 or self.center_scale <= 0:
            raise ConfigError("noise_std must be >= 0, center_scale > 0")


def _rotate_planes(x: np.ndarray, angle: float) -> np.ndarray:
    """Givens rotation by `angle` applied in coordinate planes
    (0,1), (2,3), ... along the last axis."""
    out = x.copy()
    c, s = np.cos(angle), np.sin(angle)
    d = x.shape[-1]
    for i in range(0, d - 1, 2):
        a = x[..., i]
        b = x[..., i + 1]
        out[..., i] = c * a - s * b
        out[..., i + 1] = s * a + c * b
    return out


def synth_domains(config: SynthConfig):
    """Generate (source, target) datasets with shared class identities.

    Class centers are drawn once; target centers are the shifted source
    centers, so shift_magnitude = 0 gives identical distributions.
    """
    config.validate()
    rng = RngStream(config.seed, (901,))
    d, c = config.feature_dim, config.num_classes
    centers = rng.normal((c, d), std=config.center_scale)

    shifted = centers
    if config.shift_kind in ("rotation", "both"):
        shifted = _rotate_planes(shifted, config.shift_magnitude)
    if config.shift_kind in ("mean-offset", "both"):
        direction = rng.normal(d)
        norm = np.linalg.norm(direction)
        direction = direction / norm if norm > 0 else direction
        shifted = shifted + config.shift_magnitude * direction

    def build(cls_centers, domain, stream):
        n = c * config.samples_per_class
        labels = np.repeat(np.arange(c, dtype=np.int64),
                           config.samples_per_class)
        noise = stream.normal((n, d), std=config.noise_std)
        feats = cls_centers[labels] + noise
        return FeatureDataset(feats, labels, c, domain)

    source = build(centers, "source", rng.derive(1))
    target = build(shifted, "target", rng.derive(2))
    return source, target


def save_features(dataset: FeatureDataset, path) -> None:
    """Write a dataset; .csv paths get the CSV form, others FTDS binary."""
    if str(path).endswith(".csv"):
        _save_csv(dataset, path)
    else:
        with open(path, "wb") as f:
            f.write(serialize_features(dataset))


def load_features(path) -> FeatureDataset:
    if str(path).endswith(".csv"):
        return _load_csv(path)
    with open(path, "rb") as f:
        return deserialize_features(f.read())


def serialize_features(dataset: FeatureDataset) -> bytes:
    name = dataset.domain_name.encode("utf-8")
    buf = io.BytesIO()
    buf.write(FTDS_MAGIC)
    buf.write(struct.pack("<III", FTDS_VERSION, dataset.feature_dim,
                          dataset.num_classes))
    buf.write(struct.pack("<I", len(name)))
    buf.write(name)
    buf.write(struct.pack("<Q", len(dataset)))
    for label, row in zip(dataset.labels, dataset.features):
        buf.write(struct.pack("<I", int(label)))
        buf.write(row.astype("<f8").tobytes())
    return buf.getvalue()


def deserialize_features(data: bytes) -> FeatureDataset:
    def need(offset, count, what):
        if offset + count > len(data):
            raise FormatError(
                f"truncated feature file: needed {count} bytes for {what} "
                f"at byte offset {offset}"
            )

    need(0, 4, "magic")
    if data[:4] != FTDS_MAGIC:
        raise FormatError("bad magic at byte offset 0 (expected 'FTDS')")
    need(4, 12, "header")
    version, dim, num_classes = struct.unpack_from("<III", data, 4)
    if version != FTDS_VERSION:
        raise FormatError(
            f"unsupported format version {version} at byte offset 4"
        )
    need(16, 4, "name length")
    (name_len,) = struct.unpack_from("<I", data, 16)
    need(20, name_len, "domain name")
    name = data[20:20 + name_len].decode("utf-8")
    off = 20 + name_len
    need(off, 8, "sample count")
    (count,) = struct.unpack_from("<Q", data, off)
    off += 8

    features = np.empty((count, dim), dtype=np.float64)
    labels = np.empty(count, dtype=np.int64)
    row_bytes = 4 + 8 * dim
    for i in range(count):
        need(off, row_bytes, f"sample {i}")
        (label,) = struct.unpack_from("<I", data, off)
        if label >= num_classes:
            raise FormatError(
                f"label {label} >= num_classes {num_classes} at byte "
                f"offset {off}"
            )
        labels[i] = label
        features[i] = np.frombuffer(data, dtype="<f8", count=dim,
                                    offset=off + 4)
        off += row_bytes
    if off != len(data):
        raise FormatError(f"trailing bytes at byte offset {off}")
    return FeatureDataset(features, labels, num_classes, name)


def _save_csv(dataset: FeatureDataset, path) -> None:
    # repr() of a float round-trips exactly, keeping CSV equal to binary.
    with open(path, "w", newline="") as f:
        header = ["label"] + [f"f{i}" for i in range(dataset.feature_dim)]
        f.write("# domain=%s num_classes=%d\n"
                % (dataset.domain_name, dataset.num_classes))
        f.write(",".join(header) + "\n")
        for label, row in zip(dataset.labels, dataset.features):
            f.write(str(int(label)) + ","
                    + ",".join(repr(float(v)) for v in row) + "\n")


def _load_csv(path) -> FeatureDataset:
    with open(path, "r", newline="") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines:
        raise FormatError("empty CSV feature file")
    domain = "unknown"
    num_classes = None
    if lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            if tok.startswith("domain="):
                domain = tok[len("domain="):]
            elif tok.startswith("num_classes="):
                num_classes = int(tok[len("num_classes="):])
        lines = lines[1:]
    if not lines or not lines[0].startswith("label,"):
        raise FormatError("CSV header must start with 'label,f0,...'")
    dim = len(lines[0].split(",")) - 1
    rows = lines[1:]
    features = np.empty((len(rows), dim), dtype=np.float64)
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != dim + 1:
            raise FormatError(f"CSV row {i} has {len(parts) - 1} features, "
                              f"expected {dim}")
        labels[i] = int(parts[0])
        features[i] = [float(v) for v in parts[1:]]
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 1
    return FeatureDataset(features, labels, num_classes, domain)


def split(dataset: FeatureDataset, train_fraction: float, seed: int):
    """Stratified, seeded train/test split; disjoint and exhaustive."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    rng = RngStream(seed, (902,))
    train_idx, test_idx = [], []
    for cls in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise DataError(
                f"class {cls} has {idx.size} sample(s); need >= 2 to "
                "stratify"
            )
        perm = idx[rng.permutation(idx.size)]
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train_idx.extend(perm[:n_train])
        test_idx.extend(perm[n_train:])
    train_idx = np.sort(np.asarray(train_idx, dtype=np.int64))
    test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))

    def take(idx):
        return FeatureDataset(dataset.features[idx], dataset.labels[idx],
                              dataset.num_classes, dataset.domain_name)

    return take(train_idx), take(test_idx)
