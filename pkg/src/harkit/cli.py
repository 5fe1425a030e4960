"""Command-line front door: generate / train / transfer / loso.

Exit codes: 0 success, 2 usage, 3 I/O, 4 data or file format, 5 configuration.
Logging goes to stderr at the level named by HAR_LOG (error|info|debug);
stdout carries one machine-readable summary line per command.
"""

import argparse
import copy
import json
import logging
import os
import sys

import numpy as np

from .checkpoint import load_model, save_model
from .datasets import (SynthConfig, config_digest, load_sda, load_synth,
                       load_wisdm, save_synth)
from .errors import (ConfigError, DataError, DimensionError, HarkitError,
                     ProtocolError)
from .evaluate import VARIANTS, derive_seed, evaluate, export_report, run_experiment
from .model import NetworkConfig, build_network, predict, train
from .signal import fit_discretizer
from .transfer import (TransferSpec, fine_tune, freeze_all_but_classifier,
                       sample_transfer_instances)

log = logging.getLogger("harkit.cli")

DEFAULT_RUN_CONFIG = {
    "network": {
        "bins": 64, "embed_dim": 8,
        "blocks": [[32, 5, 2, 0.5], [64, 5, 2, 0.5]],
        "learning_rate": 1e-3, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8,
        "epochs": 50, "batch_size": 32, "seed": 0,
    },
    "transfer": {"k": 3, "epochs": 30, "learning_rate": 1e-3, "seed": 0},
    "dataset": {"window": None, "stride": None, "smooth_width": 3},
    "seeds": [0, 1, 2, 3, 4],
}


def merge_run_config(user: dict) -> dict:
    """Overlay a user config document onto the defaults, rejecting unknown keys."""
    merged = copy.deepcopy(DEFAULT_RUN_CONFIG)
    for key, value in user.items():
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            for sub, sub_value in value.items():
                if sub not in merged[key]:
                    raise ConfigError(f"unknown config key {key!r}.{sub!r}")
                merged[key][sub] = sub_value
        else:
            merged[key] = value
    return merged


def load_run_config(path) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_RUN_CONFIG)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config file must hold a JSON object")
    return merge_run_config(user)


def _load_dataset(name: str, path, ds_cfg: dict):
    smooth_width = ds_cfg["smooth_width"]
    if name == "wisdm":
        return load_wisdm(path, window=ds_cfg["window"] or 200,
                          stride=ds_cfg["stride"] or 100, smooth_width=smooth_width)
    if name == "sda":
        return load_sda(path, smooth_width=smooth_width)
    if name == "synth":
        return load_synth(path, smooth_width=smooth_width)
    raise ConfigError(f"unknown dataset kind {name!r}")


def _resolve_network(net_cfg: dict, dataset) -> NetworkConfig:
    cfg = NetworkConfig.from_dict({**net_cfg, "channels": dataset.num_channels,
                                   "window": dataset.window,
                                   "classes": len(dataset.labels)})
    cfg.validate()
    return cfg


def _write_lock(out_dir, command: str, merged: dict, resolved: dict) -> None:
    doc = {"command": command, "config": merged, "resolved": resolved}
    os.makedirs(out_dir or ".", exist_ok=True)
    with open(os.path.join(out_dir or ".", "config.lock.json"), "w",
              encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    if args.subjects < 2:
        print("error: --subjects must be at least 2 "
              "(leave-one-subject-out needs 2 subjects minimum)", file=sys.stderr)
        return 2
    cfg = SynthConfig(subjects=args.subjects, activities=args.activities,
                      segments_per_class=args.segments, window=args.window,
                      noise_std=args.noise_std, seed=args.seed)
    cfg.validate()
    manifest = save_synth(cfg, args.out)
    _write_lock(args.out, "synth", {"synth": cfg.to_dict()},
                {"digest": manifest["config_digest"]})
    print(f"synth out={args.out} subjects={cfg.subjects} activities={cfg.activities} "
          f"segments={manifest['counts']['segments']} seed={cfg.seed} "
          f"digest={manifest['config_digest']}")
    return 0


def cmd_train(args) -> int:
    merged = load_run_config(args.config)
    dataset = _load_dataset(args.dataset, args.data, merged["dataset"])
    cfg = _resolve_network(merged["network"], dataset)
    log.info("training on %d segments from %d subjects", len(dataset.segments),
             len(dataset.subjects))
    disc = fit_discretizer(dataset.segments, cfg.bins)
    model = build_network(cfg, np.random.default_rng(derive_seed(cfg.seed, 1)),
                          labels=dataset.labels, discretizer=disc)
    _, history = train(model, dataset.segments, cfg)
    save_model(model, args.out)
    log_path = os.path.splitext(args.out)[0] + ".train_log.json"
    with open(log_path, "w", encoding="utf-8") as fh:
        json.dump({"dataset": dataset.name, "epochs": cfg.epochs,
                   "loss_history": history}, fh, indent=2)
        fh.write("\n")
    _write_lock(os.path.dirname(args.out), "train", merged,
                {"network": cfg.to_dict(), "dataset": {"name": dataset.name,
                                                       "path": str(args.data)}})
    first = history[0] if history else float("nan")
    final = history[-1] if history else float("nan")
    print(f"train dataset={dataset.name} segments={len(dataset.segments)} "
          f"epochs={cfg.epochs} first_loss={first!r} final_loss={final!r} "
          f"out={args.out}")
    return 0


def cmd_transfer(args) -> int:
    source = load_model(args.model)
    merged = load_run_config(None)
    dataset = _load_dataset(args.dataset, args.data, merged["dataset"])
    if args.subject not in dataset.subjects:
        raise DataError(f"unknown subject {args.subject!r}; available: "
                        f"{', '.join(dataset.subjects)}")
    model_names = [lab.name for lab in source.labels]
    data_names = [lab.name for lab in dataset.labels]
    if model_names != data_names:
        raise DataError(f"model labels {model_names} do not match dataset labels "
                        f"{data_names}")
    target = dataset.for_subject(args.subject)
    split = sample_transfer_instances(target, args.k, args.seed)
    num_classes = len(dataset.labels)
    before, _, _ = evaluate(lambda s: predict(source, s).index,
                            split.holdout, num_classes)
    personal = freeze_all_but_classifier(source.clone())
    spec = TransferSpec(k=args.k, epochs=args.epochs,
                        learning_rate=args.learning_rate, seed=args.seed)
    fine_tune(personal, split, spec)
    after, _, _ = evaluate(lambda s: predict(personal, s).index,
                           split.holdout, num_classes)
    save_model(personal, args.out)
    _write_lock(os.path.dirname(args.out), "transfer",
                {"transfer": {"k": args.k, "epochs": args.epochs,
                              "learning_rate": args.learning_rate,
                              "seed": args.seed}},
                {"subject": args.subject, "dataset": dataset.name})
    print(f"transfer subject={args.subject} k={args.k} "
          f"n_transfer={len(split.transfer)} n_holdout={len(split.holdout)} "
          f"holdout_accuracy_before={before!r} holdout_accuracy_after={after!r} "
          f"out={args.out}")
    return 0


def cmd_loso(args) -> int:
    merged = load_run_config(args.config)
    dataset = _load_dataset(args.dataset, args.data, merged["dataset"])
    cfg = _resolve_network(merged["network"], dataset)
    spec = TransferSpec(**merged["transfer"])
    seeds = list(range(args.seeds)) if args.seeds is not None else list(merged["seeds"])
    report = run_experiment(dataset, cfg, spec, variants=args.variants,
                            seeds=seeds, parallel=args.parallel)
    csv_path, md_path = export_report(report, args.report)
    _write_lock(os.path.dirname(args.report), "loso", merged,
                {"network": cfg.to_dict(), "seeds": seeds,
                 "variants": list(args.variants),
                 "dataset": {"name": dataset.name, "path": str(args.data)}})
    agg = report.aggregates()
    summary = " ".join(f"{v}={agg[v]['mean_accuracy']:.4f}" for v in args.variants)
    print(f"loso dataset={dataset.name} folds={len(dataset.subjects)} "
          f"seeds={len(seeds)} rows={len(report.rows)} {summary} "
          f"report={csv_path} summary={md_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _variant_list(text: str):
    variants = tuple(v.strip() for v in text.split(",") if v.strip())
    for v in variants:
        if v not in VARIANTS:
            raise argparse.ArgumentTypeError(
                f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    if not variants:
        raise argparse.ArgumentTypeError("at least one variant is required")
    return variants


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harkit",
        description="Personalized activity recognition: train, transfer, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-subject dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=6)
    p.add_argument("--activities", type=int, default=4)
    p.add_argument("--segments", type=int, default=12,
                   help="segments per subject-activity pair")
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--noise-std", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a source model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", required=True, choices=["wisdm", "sda", "synth"])
    p.add_argument("--config", default=None, help="JSON run config")
    p.add_argument("--out", required=True, help="checkpoint path (.harm)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="personalize a checkpoint for one subject")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", required=True, choices=["wisdm", "sda", "synth"])
    p.add_argument("--subject", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("loso", help="leave-one-subject-out experiment")
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", required=True, choices=["wisdm", "sda", "synth"])
    p.add_argument("--config", default=None)
    p.add_argument("--variants", type=_variant_list, default=VARIANTS)
    p.add_argument("--seeds", type=int, default=None,
                   help="number of seeds (0..N-1); defaults to the config list")
    p.add_argument("--report", required=True, help="output CSV path")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_loso)
    return parser


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("HAR_LOG", "info").strip().lower()
    logging.basicConfig(stream=sys.stderr,
                        level=levels.get(name, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (DataError, DimensionError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except HarkitError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
