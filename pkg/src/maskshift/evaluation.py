"""Baselines, source/target gain computation, multi-seed aggregation,
and JSON/CSV report emission.

source gain = accuracy(masked head, source test)
            - accuracy(unmasked baseline, source test);
target gain likewise on the target test set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import FeatureDataset
from .errors import GroupingError
from .masking import WeightMask
from .model import MlpHead, TrainConfig, evaluate_accuracy, run_training
from .rng import RngStream


@dataclass(frozen=True)
class GainRecord:
    source_gain: float
    target_gain: float
    strategy: str
    init_strategy: str
    source_domain: str
    target_domain: str
    seed: int
    frozen_fraction: float

    def cell(self):
        return (self.strategy, self.init_strategy, self.source_domain,
                self.target_domain)


@dataclass(frozen=True)
class TransferReport:
    records: tuple  # per-seed GainRecords, one cell
    mean_source_gain: float
    mean_target_gain: float
    std_source_gain: float | None  # absent below 2 seeds
    std_target_gain: float | None
    config_digest: str = ""


def unmasked_finetune_baseline(source_head: MlpHead,
                               target_ds: FeatureDataset,
                               config: TrainConfig,
                               rng: RngStream) -> MlpHead:
    """Fine-tune all head weights on the target domain; the reference
    point for both gains."""
    tuned = source_head.copy()
    run_training(tuned, target_ds, config, rng)
    return tuned


def compute_gains(masked_head: MlpHead, baseline_head: MlpHead,
                  source_test: FeatureDataset,
                  target_test: FeatureDataset,
                  mask: WeightMask, init_strategy: str,
                  seed: int) -> GainRecord:
    return GainRecord(
        source_gain=evaluate_accuracy(masked_head, source_test)
        - evaluate_accuracy(baseline_head, source_test),
        target_gain=evaluate_accuracy(masked_head, target_test)
        - evaluate_accuracy(baseline_head, target_test),
        strategy=mask.strategy,
        init_strategy=init_strategy,
        source_domain=source_test.domain_name,
        target_domain=target_test.domain_name,
        seed=seed,
        frozen_fraction=mask.frozen_fraction,
    )


def aggregate_runs(records, config_digest: str = "") -> TransferReport:
    """Per-axis mean and population std over seeds of one experiment
    cell."""
    records = tuple(records)
    if not records:
        raise GroupingError("cannot aggregate zero records")
    cells = {r.cell() for r in records}
    if len(cells) > 1:
        raise GroupingError(f"records span multiple cells: {sorted(cells)}")
    records = tuple(sorted(records, key=lambda r: r.seed))
    sg = np.array([r.source_gain for r in records])
    tg = np.array([r.target_gain for r in records])
    has_std = len(records) >= 2
    return TransferReport(
        records=records,
        mean_source_gain=float(sg.mean()),
        mean_target_gain=float(tg.mean()),
        std_source_gain=float(sg.std()) if has_std else None,
        std_target_gain=float(tg.std()) if has_std else None,
        config_digest=config_digest,
    )


_CSV_COLUMNS = [
    "strategy", "init_strategy", "source_domain", "target_domain",
    "mean_source_gain", "mean_target_gain", "std_source_gain",
    "std_target_gain", "num_seeds", "mean_frozen_fraction",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # round-trips exactly
    return str(value)


def emit_report(reports, fmt: str = "json") -> str:
    """Serialize one or more TransferReports with stable field ordering.

    JSON round-trips losslessly through parse_report; CSV has one row per
    (strategy, init, source, target) cell.
    """
    reports = list(reports)
    if fmt == "json":
        payload = []
        for rep in sorted(reports, key=lambda r: r.records[0].cell()):
            payload.append({
                "cell": {
                    "strategy": rep.records[0].strategy,
                    "init_strategy": rep.records[0].init_strategy,
                    "source_domain": rep.records[0].source_domain,
                    "target_domain": rep.records[0].target_domain,
                },
                "mean_source_gain": rep.mean_source_gain,
                "mean_target_gain": rep.mean_target_gain,
                "std_source_gain": rep.std_source_gain,
                "std_target_gain": rep.std_target_gain,
                "config_digest": rep.config_digest,
                "records": [asdict(r) for r in rep.records],
            })
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        lines = [",".join(_CSV_COLUMNS)]
        for rep in sorted(reports, key=lambda r: r.records[0].cell()):
            first = rep.records[0]
            ff = float(np.mean([r.frozen_fraction for r in rep.records]))
            lines.append(",".join(_fmt(v) for v in [
                first.strategy, first.init_strategy, first.source_domain,
                first.target_domain, rep.mean_source_gain,
                rep.mean_target_gain, rep.std_source_gain,
                rep.std_target_gain, len(rep.records), ff,
            ]))
        return "\n".join(lines) + "\n"
    raise GroupingError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> list:
    """Parse a JSON report back into TransferReports (inverse of
    emit_report's JSON form)."""
    payload = json.loads(text)
    reports = []
    for entry in payload:
        records = tuple(GainRecord(**r) for r in entry["records"])
        reports.append(TransferReport(
            records=records,
            mean_source_gain=entry["mean_source_gain"],
            mean_target_gain=entry["mean_target_gain"],
            std_source_gain=entry["std_source_gain"],
            std_target_gain=entry["std_target_gain"],
            config_digest=entry.get("config_digest", ""),
        ))
    return reports


def report_path(out_dir, source_domain: str, target_domain: str,
                fmt: str) -> str:
    return f"{out_dir}/report_{source_domain}_{target_domain}.{fmt}"


def init_ablation_table(reports) -> str:
    """Render an init-strategy ablation: one row per init strategy, one
    column pair (S Gain, T Gain) per source domain.

    Reports should all share one masking strategy (typically binary).
    """
    domains = sorted({r.records[0].source_domain for r in reports})
    by_key = {(r.records[0].init_strategy,
               r.records[0].source_domain): r for r in reports}
    inits = sorted({r.records[0].init_strategy for r in reports})
    header = ["init"] + [f"{d} S Gain,{d} T Gain" for d in domains]
    lines = [",".join(header)]
    for init in inits:
        row = [init]
        for d in domains:
            rep = by_key.get((init, d))
            if rep is None:
                row.append(",")
            else:
                row.append(f"{rep.mean_source_gain!r},"
                           f"{rep.mean_target_gain!r}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
