"""maskshift: per-weight freeze masks for forgetting-aware domain
transfer of linear classifier heads."""

from .core import (
    OptimizerState,
    finite_difference_check,
    gumbel_sigmoid_sample,
    linear_backward,
    linear_forward,
    optimizer_step,
    sigmoid,
    softmax_cross_entropy,
)
from .data import (
    FeatureDataset,
    SynthConfig,
    load_features,
    save_features,
    split,
    synth_domains,
)
from .evaluation import (
    GainRecord,
    TransferReport,
    aggregate_runs,
    compute_gains,
    emit_report,
    parse_report,
    unmasked_finetune_baseline,
)
from .experiment import ExperimentConfig, run_experiment, run_seed
from .masking import (
    WeightMask,
    harden_mask,
    learn_binary_mask,
    learn_editor_delta,
    load_mask,
    mask_sparsity,
    naive_mask,
    save_mask,
    threshold_delta,
)
from .model import (
    MlpHead,
    ParamSnapshot,
    TrainConfig,
    evaluate_accuracy,
    load_head,
    save_head,
    train_head,
    weight_stats,
)
from .rng import RngStream
from .transfer import (
    finetune_with_mask,
    frozen_drift,
    init_reuse_weights,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "FeatureDataset", "GainRecord", "MlpHead",
    "OptimizerState", "ParamSnapshot", "RngStream", "SynthConfig",
    "TrainConfig", "TransferReport", "WeightMask", "aggregate_runs",
    "compute_gains", "emit_report", "evaluate_accuracy",
    "finetune_with_mask", "finite_difference_check", "frozen_drift",
    "gumbel_sigmoid_sample", "harden_mask", "init_reuse_weights",
    "learn_binary_mask", "learn_editor_delta", "linear_backward",
    "linear_forward", "load_features", "load_head", "load_mask",
    "mask_sparsity", "naive_mask", "optimizer_step", "parse_report",
    "run_experiment", "run_seed", "save_features", "save_head",
    "save_mask", "sigmoid", "softmax_cross_entropy", "split",
    "synth_domains", "threshold_delta", "train_head",
    "unmasked_finetune_baseline", "weight_stats",
]
