"""Command-line entry point.

Subcommands: synth, train-source, learn-mask, transfer, experiment,
verify. Exit codes: 0 ok, 2 config/usage error, 3 I/O or file-format
error, 4 violated internal invariant. The transfer stage takes no
source-data argument by construction.

Config files are JSON; see README for the schema. MASKSHIFT_SEED serves
as a seed fallback when neither --seed nor the config provides one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import kernels
from .data import SynthConfig, load_features, save_features, synth_domains
from .errors import (
    ConfigError,
    DataError,
    DeterminismError,
    DimensionError,
    FormatError,
    FreezeViolationError,
    GroupingError,
    MaskshiftError,
    NumericError,
    StateError,
)
from .evaluation import emit_report, report_path
from .experiment import (
    ExperimentConfig,
    config_digest,
    learn_strategy_mask,
    run_experiment,
)
from .masking import load_mask, mask_sparsity, save_mask
from .model import TrainConfig, evaluate_accuracy, load_head, save_head, \
    train_head
from .rng import RngStream
from .transfer import finetune_with_mask, frozen_drift, init_reuse_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

_CONFIG_ERRORS = (ConfigError, DataError, DimensionError, StateError,
                  GroupingError)
_IO_ERRORS = (OSError, FormatError, json.JSONDecodeError)
_INTERNAL_ERRORS = (FreezeViolationError, NumericError, DeterminismError)


def _read_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r") as f:
        return json.load(f)


def _resolve_seed(arg_seed, config: dict):
    if arg_seed is not None:
        return arg_seed
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("MASKSHIFT_SEED")
    if env is not None:
        return int(env)
    return 0


def _train_config(config: dict, seed: int, **overrides) -> TrainConfig:
    cfg = TrainConfig(**config.get("train", {}))
    cfg = cfg.with_overrides(seed=seed, **overrides)
    cfg.validate(min_epochs=0)
    return cfg


def cmd_synth(args) -> int:
    config = _read_config(args.config)
    if "synth" not in config:
        raise ConfigError("config must contain a 'synth' section")
    synth_cfg = SynthConfig(**config["synth"])
    out_dir = args.out or config.get("out_dir", ".")
    if not os.path.isdir(out_dir):
        raise OSError(f"output directory {out_dir!r} does not exist")
    source, target = synth_domains(synth_cfg)
    src_path = os.path.join(out_dir, config.get("out_source",
                                                "source.ftds"))
    tgt_path = os.path.join(out_dir, config.get("out_target",
                                                "target.ftds"))
    save_features(source, src_path)
    save_features(target, tgt_path)
    print(f"wrote {src_path} ({len(source)} samples) and {tgt_path} "
          f"({len(target)} samples)")
    return EXIT_OK


def cmd_train_source(args) -> int:
    config = _read_config(args.config)
    seed = _resolve_seed(args.seed, config)
    dataset = load_features(args.data)
    if "num_classes" in config and config["num_classes"] != \
            dataset.num_classes:
        raise ConfigError(
            f"config num_classes {config['num_classes']} != dataset "
            f"num_classes {dataset.num_classes}")
    cfg = _train_config(config, seed)
    cfg.validate()
    head, history = train_head(dataset, cfg, RngStream(seed).derive(1))
    head.config_digest = config_digest(vars(cfg))
    save_head(head, args.out)
    acc = evaluate_accuracy(head, dataset)
    print(f"trained head on {dataset.domain_name}: final loss "
          f"{history[-1]:.6f}, train accuracy {acc:.4f}; wrote {args.out}")
    return EXIT_OK


def cmd_learn_mask(args) -> int:
    config = _read_config(args.config)
    seed = _resolve_seed(args.seed, config)
    head = load_head(args.head)
    cfg = _train_config(config, seed, forward_mask=args.forward_mask)
    digest = config_digest(vars(cfg))

    exp = ExperimentConfig(train=cfg,
                           mask_train=config.get("mask_train", {}),
                           freeze_direction="freeze-" + args.freeze_direction)
    # naive masking reads only the trained weights; no dataset needed
    if args.strategy == "naive":
        dataset = None
    else:
        if args.data is None:
            raise ConfigError(
                f"strategy {args.strategy!r} requires --data (source "
                "features)")
        dataset = load_features(args.data)

    rng = RngStream(seed).derive(3)
    mask = learn_strategy_mask(args.strategy, head, dataset, exp, rng,
                               digest)
    save_mask(mask, args.out)
    frozen, reuse = mask_sparsity(mask)
    print(f"{args.strategy} mask: frozen_fraction {frozen:.4f}, "
          f"reuse_fraction {reuse:.4f}; wrote {args.out}")

    if args.strategy == "editor" and args.both_directions:
        other = "freeze-small" if exp.freeze_direction == "freeze-large" \
            else "freeze-large"
        exp_alt = ExperimentConfig(train=cfg,
                                   mask_train=exp.mask_train,
                                   freeze_direction=other)
        alt = learn_strategy_mask("editor", head, dataset, exp_alt,
                                  RngStream(seed).derive(3), digest)
        stem, ext = os.path.splitext(args.out)
        alt_path = f"{stem}.{other.removeprefix('freeze-')}{ext}"
        save_mask(alt, alt_path)
        print(f"editor mask ({other}): frozen_fraction "
              f"{alt.frozen_fraction:.4f}; wrote {alt_path}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    # no source-data parameter: source features are unavailable past the
    # mask stage by interface design
    config = _read_config(args.config)
    seed = _resolve_seed(args.seed, config)
    head = load_head(args.head)
    mask = load_mask(args.mask)
    target = load_features(args.data)
    cfg = _train_config(config, seed, **config.get("finetune", {}))
    cfg.validate()
    rng = RngStream(seed).derive(4)
    prepared = init_reuse_weights(head, mask, args.init, rng.derive(0))
    tuned = finetune_with_mask(prepared, mask, target, cfg, rng.derive(1))
    drift = frozen_drift(tuned, mask)
    print(f"max frozen drift = {drift}")
    if drift != 0.0:
        print("freeze invariant violated", file=sys.stderr)
        return EXIT_INTERNAL
    tuned.config_digest = config_digest(vars(cfg))
    save_head(tuned, args.out)
    acc = evaluate_accuracy(tuned, target)
    print(f"fine-tuned on {target.domain_name}: target train accuracy "
          f"{acc:.4f}; wrote {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    raw = _read_config(args.config)
    cfg = ExperimentConfig.from_dict(raw)
    out_dir = args.out or "."
    if not os.path.isdir(out_dir):
        raise OSError(f"output directory {out_dir!r} does not exist")
    jobs = args.jobs or os.cpu_count() or 1
    reports, failures = run_experiment(cfg, raw, jobs=jobs)

    if reports:
        first = reports[0].records[0]
        src, tgt = first.source_domain, first.target_domain
        agg_path = report_path(out_dir, src, tgt, args.format)
        with open(agg_path, "w") as f:
            f.write(emit_report(reports, args.format))
        rec_path = os.path.join(out_dir, f"records_{src}_{tgt}.csv")
        with open(rec_path, "w") as f:
            f.write("strategy,init_strategy,source_domain,target_domain,"
                    "seed,source_gain,target_gain,frozen_fraction\n")
            rows = sorted((r for rep in reports for r in rep.records),
                          key=lambda r: (r.cell(), r.seed))
            for r in rows:
                f.write(f"{r.strategy},{r.init_strategy},"
                        f"{r.source_domain},{r.target_domain},{r.seed},"
                        f"{r.source_gain!r},{r.target_gain!r},"
                        f"{r.frozen_fraction!r}\n")
        print(f"wrote {agg_path} and {rec_path} "
              f"({len(reports)} cells, backend={kernels.BACKEND})")
    for seed, err in sorted(failures.items()):
        print(f"seed {seed} failed: {err}", file=sys.stderr)
    return EXIT_OK if not failures else 1


def cmd_verify(args) -> int:
    config = _read_config(args.config)
    seed = _resolve_seed(args.seed, config)
    cfg = _train_config(config, seed, **config.get("finetune", {})) \
        if args.kind == "finetune" else _train_config(config, seed)
    expected = config_digest(vars(cfg))
    with open(args.artifact, "rb") as f:
        magic = f.read(4)
    if magic == b"MSHD":
        embedded = load_head(args.artifact).config_digest
    elif magic == b"MSMK":
        embedded = load_mask(args.artifact).config_digest
    else:
        raise FormatError(f"unknown artifact magic {magic!r}")
    if embedded != expected:
        print(f"digest mismatch: artifact has {embedded or '(none)'}, "
              f"config derives {expected}", file=sys.stderr)
        return EXIT_INTERNAL
    print("digest ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="maskshift",
        description="Weight-mask based domain transfer for classifier "
                    "heads")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate synthetic source/target "
                                      "feature files")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None, help="output directory")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("train-source", help="train the head on source "
                                             "features")
    sp.add_argument("--data", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train_source)

    sp = sub.add_parser("learn-mask", help="learn a freeze mask from a "
                                           "trained head")
    sp.add_argument("--head", required=True)
    sp.add_argument("--strategy", required=True,
                    choices=["naive", "editor", "binary"])
    sp.add_argument("--data", default=None,
                    help="source features (not needed for naive)")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--freeze-direction", choices=["large", "small"],
                    default="large")
    sp.add_argument("--forward-mask", choices=["soft", "hard"],
                    default="soft")
    sp.add_argument("--both-directions", action="store_true",
                    help="editor only: also write the opposite "
                         "freeze-direction mask")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_learn_mask)

    sp = sub.add_parser("transfer", help="masked fine-tune on target "
                                         "features")
    sp.add_argument("--head", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--data", required=True, help="target features")
    sp.add_argument("--init", choices=["source-final", "source-init",
                                       "random"],
                    default="source-init")
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_transfer)

    sp = sub.add_parser("experiment", help="run the full strategy x init "
                                           "x seed grid")
    sp.add_argument("--config", required=True)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(fn=cmd_experiment)

    sp = sub.add_parser("verify", help="check an artifact's embedded "
                                       "config digest")
    sp.add_argument("--artifact", required=True)
    sp.add_argument("--config", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--kind", choices=["train", "finetune"],
                    default="train")
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _INTERNAL_ERRORS as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except MaskshiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
