"""Experiment grid runner: (strategy x init x seed) cells over a source
and target domain, each compared against the per-seed unmasked baseline.

Stage ordering enforces the pipeline contract: source data is used for
head training and mask learning only; everything after sees target data
and the head/mask artifacts alone.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .data import FeatureDataset, SynthConfig, load_features, split, \
    synth_domains
from .errors import ConfigError, FreezeViolationError
from .evaluation import (
    GainRecord,
    aggregate_runs,
    compute_gains,
    unmasked_finetune_baseline,
)
from .masking import (
    harden_mask,
    learn_binary_mask,
    learn_editor_delta,
    naive_mask,
    threshold_delta,
)
from .model import TrainConfig, train_head
from .rng import RngStream
from .transfer import finetune_with_mask, frozen_drift, init_reuse_weights

STRATEGY_STREAM = {"naive": 10, "editor": 11, "binary": 12}
INIT_STREAM = {"source-final": 20, "source-init": 21, "random": 22}


def config_digest(obj) -> str:
    """Stable digest of a JSON-serializable config."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class ExperimentConfig:
    strategies: list = field(default_factory=lambda: list(STRATEGY_STREAM))
    inits: list = field(default_factory=lambda: ["source-init"])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    synth: SynthConfig | None = None
    source_path: str | None = None
    target_path: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    mask_train: dict = field(default_factory=dict)  # strategy -> overrides
    finetune_overrides: dict = field(default_factory=dict)
    train_fraction: float = 0.8
    split_seed: int = 0
    freeze_direction: str = "freeze-large"

    def validate(self):
        if not self.strategies or not self.inits or not self.seeds:
            raise ConfigError(
                "need at least one strategy, one init, and one seed")
        for s in self.strategies:
            if s not in STRATEGY_STREAM:
                raise ConfigError(f"unknown strategy {s!r}")
        for i in self.inits:
            if i not in INIT_STREAM:
                raise ConfigError(f"unknown init strategy {i!r}")
        if self.synth is None and not (self.source_path and
                                       self.target_path):
            raise ConfigError(
                "config must provide either synth parameters or both "
                "source_path and target_path")

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        known = {"strategies", "inits", "seeds", "synth", "source_path",
                 "target_path", "train", "mask_train", "finetune",
                 "train_fraction", "split_seed", "freeze_direction"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("strategies", "inits", "seeds", "source_path",
                    "target_path", "train_fraction", "split_seed",
                    "freeze_direction"):
            if key in d:
                setattr(cfg, key, d[key])
        if "synth" in d:
            cfg.synth = SynthConfig(**d["synth"])
        if "train" in d:
            cfg.train = TrainConfig(**d["train"])
        cfg.mask_train = dict(d.get("mask_train", {}))
        cfg.finetune_overrides = dict(d.get("finetune", {}))
        cfg.validate()
        return cfg

    def digest(self) -> str:
        payload = {
            "strategies": sorted(self.strategies),
            "inits": sorted(self.inits),
            "seeds": sorted(self.seeds),
            "synth": None if self.synth is None else vars(self.synth),
            "source_path": self.source_path,
            "target_path": self.target_path,
            "train": vars(self.train),
            "mask_train": self.mask_train,
            "finetune": self.finetune_overrides,
            "train_fraction": self.train_fraction,
            "split_seed": self.split_seed,
            "freeze_direction": self.freeze_direction,
        }
        return config_digest(payload)


def load_domains(cfg: ExperimentConfig):
    if cfg.synth is not None:
        return synth_domains(cfg.synth)
    return load_features(cfg.source_path), load_features(cfg.target_path)


def learn_strategy_mask(strategy: str, head, source_train, cfg, rng,
                        digest: str = ""):
    """Dispatch to the strategy's mask learner; naive needs no data."""
    overrides = cfg.mask_train.get(strategy, {})
    mask_cfg = cfg.train.with_overrides(**overrides)
    if strategy == "naive":
        return naive_mask(head.W, seed=rng.seed, config_digest=digest)
    if strategy == "editor":
        delta = learn_editor_delta(head, source_train, mask_cfg, rng)
        return threshold_delta(delta, cfg.freeze_direction,
                               seed=rng.seed, config_digest=digest)
    if strategy == "binary":
        logits = learn_binary_mask(head, source_train, mask_cfg, rng)
        return harden_mask(logits, seed=rng.seed, config_digest=digest)
    raise ConfigError(f"unknown strategy {strategy!r}")


def run_seed(cfg: ExperimentConfig, seed: int,
             source_train, source_test, target_train, target_test):
    """All (strategy x init) cells for one seed, sharing the source head
    and the unmasked baseline. Returns a list of GainRecords."""
    digest = cfg.digest()
    rng = RngStream(seed)
    train_cfg = cfg.train.with_overrides(seed=seed)
    tune_cfg = train_cfg.with_overrides(**cfg.finetune_overrides)

    head, _ = train_head(source_train, train_cfg, rng.derive(1))
    head.config_digest = digest
    baseline = unmasked_finetune_baseline(head, target_train, tune_cfg,
                                          rng.derive(2))
    records = []
    for strategy in cfg.strategies:
        mask = learn_strategy_mask(
            strategy, head, source_train, cfg,
            rng.derive(STRATEGY_STREAM[strategy]), digest)
        for init in cfg.inits:
            cell_rng = rng.derive(100 + STRATEGY_STREAM[strategy]) \
                .derive(INIT_STREAM[init])
            prepared = init_reuse_weights(head, mask, init,
                                          cell_rng.derive(0))
            tuned = finetune_with_mask(prepared, mask, target_train,
                                       tune_cfg, cell_rng.derive(1))
            drift = frozen_drift(tuned, mask)
            if drift != 0.0:
                raise FreezeViolationError(
                    f"frozen weights drifted by {drift} "
                    f"(strategy={strategy}, init={init}, seed={seed})")
            records.append(compute_gains(tuned, baseline, source_test,
                                         target_test, mask, init, seed))
    return records


def _seed_worker(args):
    cfg_dict, seed, datasets = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return seed, run_seed(cfg, seed, *datasets), None
    except Exception as exc:  # cell failures are recorded, not fatal
        return seed, [], f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig, cfg_dict: dict | None = None,
                   jobs: int = 1):
    """Run the full grid; returns (reports, failures).

    Cells for different seeds run in a process pool when jobs > 1;
    results are aggregated in sorted order so reruns are byte-identical.
    """
    cfg.validate()
    source, target = load_domains(cfg)
    source_train, source_test = split(source, cfg.train_fraction,
                                      cfg.split_seed)
    target_train, target_test = split(target, cfg.train_fraction,
                                      cfg.split_seed)
    datasets = (source_train, source_test, target_train, target_test)

    all_records: list[GainRecord] = []
    failures: dict[int, str] = {}
    seeds = sorted(set(cfg.seeds))
    if jobs > 1 and len(seeds) > 1 and cfg_dict is not None:
        work = [(cfg_dict, s, datasets) for s in seeds]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for seed, records, err in pool.map(_seed_worker, work):
                if err is not None:
                    failures[seed] = err
                all_records.extend(records)
    else:
        for seed in seeds:
            try:
                all_records.extend(run_seed(cfg, seed, *datasets))
            except Exception as exc:
                failures[seed] = f"{type(exc).__name__}: {exc}"

    by_cell: dict[tuple, list] = {}
    for rec in all_records:
        by_cell.setdefault(rec.cell(), []).append(rec)
    reports = [aggregate_runs(records, cfg.digest())
               for _, records in sorted(by_cell.items())]
    return reports, failures
