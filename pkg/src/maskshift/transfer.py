"""Masked fine-tuning protocol: split the head's W into frozen and
tunable sets via a mask, re-initialize the tunable entries, and train on
the target domain without touching frozen weights.

Source-domain data never enters this module; its inputs are the trained
head (with snapshots), the mask, and target data only.
"""

from __future__ import annotations

import numpy as np

from .data import FeatureDataset
from .errors import DimensionError, StateError
from .masking import WeightMask
from .model import (
    SNAP_SOURCE_FINAL,
    SNAP_SOURCE_INIT,
    MlpHead,
    TrainConfig,
    run_training,
)
from .rng import RngStream

INIT_STRATEGIES = ("source-final", "source-init", "random")
RANDOM_INIT_STD = 0.1  # N(0, 0.01) draws for the random strategy


def init_reuse_weights(head: MlpHead, mask: WeightMask, strategy: str,
                       rng: RngStream | None = None,
                       random_std: float = RANDOM_INIT_STD) -> MlpHead:
    """Prepare a head for target fine-tuning.

    Frozen entries (bit 1) are always set to their source-final values;
    reuse entries (bit 0) come from the chosen strategy: the source-final
    values, the pre-training source-init values, or fresh N(0, 0.01)
    draws. Bias is untouched.
    """
    if strategy not in INIT_STRATEGIES:
        raise StateError(f"unknown init strategy {strategy!r}")
    if mask.bits.shape != head.W.shape:
        raise DimensionError(
            f"mask shape {mask.bits.shape} != W shape {head.W.shape}"
        )
    if SNAP_SOURCE_FINAL not in head.snapshots:
        raise StateError("head is missing its source-final snapshot")
    final_W = head.snapshots[SNAP_SOURCE_FINAL].params["W"]

    if strategy == "source-final":
        reuse = final_W
    elif strategy == "source-init":
        if SNAP_SOURCE_INIT not in head.snapshots:
            raise StateError("head is missing its source-init snapshot")
        reuse = head.snapshots[SNAP_SOURCE_INIT].params["W"]
    else:
        if rng is None:
            raise StateError("random init strategy requires an RngStream")
        reuse = rng.normal(head.W.shape, std=random_std)

    out = head.copy()
    frozen = mask.bits != 0
    out.W = np.where(frozen, final_W, reuse)
    return out


def finetune_with_mask(head: MlpHead, mask: WeightMask,
                       target_ds: FeatureDataset, config: TrainConfig,
                       rng: RngStream) -> MlpHead:
    """Fine-tune on the target domain with frozen entries pinned.

    Gradient entries at bit-1 positions are zeroed before every optimizer
    step and the entries restored to their source-final values after it,
    so optimizer state can never leak updates into frozen slots. The
    returned head's frozen entries equal the source-final values exactly.
    """
    if mask.bits.shape != head.W.shape:
        raise DimensionError(
            f"mask shape {mask.bits.shape} != W shape {head.W.shape}"
        )
    if SNAP_SOURCE_FINAL not in head.snapshots:
        raise StateError("head is missing its source-final snapshot")
    frozen_W = head.snapshots[SNAP_SOURCE_FINAL].params["W"]
    tuned = head.copy()
    run_training(tuned, target_ds, config, rng,
                 mask_bits=mask.bits, frozen_W=frozen_W)
    return tuned


def frozen_drift(head: MlpHead, mask: WeightMask) -> float:
    """Max |W - source-final| over frozen positions; must be exactly 0
    after a correct masked fine-tune."""
    if SNAP_SOURCE_FINAL not in head.snapshots:
        raise StateError("head is missing its source-final snapshot")
    frozen = mask.bits != 0
    if not frozen.any():
        return 0.0
    ref = head.snapshots[SNAP_SOURCE_FINAL].params["W"]
    return float(np.max(np.abs(head.W[frozen] - ref[frozen])))
