"""``agmax`` command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import subprocess
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .augment import positive_pair, standard_augment
from .augment.pnm import write_pnm
from .config import TrainConfig, load_config
from .data import Dataset, channel_stats, cifar_dir
from .errors import AgmaxError, ConfigError, NumericError
from .experiments import format_table, load_datasets, smoothing_table
from .model import load_checkpoint, param_count, save_checkpoint
from .rng import make_rng
from .robustness import eval_under_attack
from .selftest import run_selftest
from .train.loop import MetricsWriter, Trainer, batch_logits, topk_accuracy

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
MANIFEST, METRICS, CHECKPOINT, SUMMARY = "manifest.json", "metrics.csv", "checkpoint.agmx", "summary.json"

log = logging.getLogger("agmax")


class UsageError(AgmaxError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5, check=True,
        )
        return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


# -- helpers --------------------------------------------------------------
def _config(args, path=None) -> TrainConfig:
    overrides = list(args.set or [])
    if getattr(args, "data", None):
        overrides.append(f"data.root={json.dumps(str(args.data))}")
    return load_config(path or args.config, overrides, seed=args.seed)


def dataset_descriptor(config: TrainConfig) -> dict:
    if config["data.source"] == "cifar10":
        return {"source": "cifar10", "root": str(cifar_dir(config["data.root"]))}
    return {"source": "synth", **asdict(config.synth_spec())}


def unique_run_dir(out: Path, seed: int) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = out / f"{stamp}-seed{seed}"
    path, i = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}-{i}")
        i += 1
    path.mkdir(parents=True)
    return path


def _run_config_for(checkpoint: Path, args) -> TrainConfig:
    """Config for a checkpoint: --config if given, else the run's manifest."""
    if args.config:
        return _config(args)
    manifest = checkpoint.parent / MANIFEST
    if not manifest.exists():
        raise ConfigError(f"no --config given and no {MANIFEST} next to {checkpoint}", "--config")
    return _config(args, manifest)


def _split(config: TrainConfig, split: str) -> tuple[Dataset, Dataset]:
    train, test = load_datasets(config)
    return train, (train if split == "train" else test)


def _load_for_eval(args):
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}", "--checkpoint")
    config = _run_config_for(ckpt, args)
    train, data = _split(config, args.split)
    model = load_checkpoint(ckpt, config.encoder(train.image_shape, train.num_classes))
    return ckpt, config, model, data


def _append_csv(path: Path, header, row) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(header)
        w.writerow(row)


def parse_epsilons(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a comma-separated list of numbers", "--epsilons") from None
    if not values:
        raise ConfigError("need at least one epsilon", "--epsilons")
    bad = [v for v in values if not (np.isfinite(v) and v >= 0)]
    if bad:
        raise ConfigError(f"epsilon must be finite and >= 0, got {bad[0]}", "--epsilons")
    return values


def parse_topk(text: Optional[str], num_classes: int) -> list[tuple[str, int]]:
    """(column name, k) pairs; the default matches the metrics CSV (top5 = min(5, C))."""
    if text is None:
        return [("top1", 1), ("top5", min(5, num_classes))]
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a list of integers", "--topk") from None
    if not ks:
        raise ConfigError("need at least one k", "--topk")
    for k in ks:
        if not 1 <= k <= num_classes:
            raise ConfigError(f"top-{k} is undefined with {num_classes} classes", "--topk")
    return [(f"top{k}", k) for k in ks]


# -- commands -------------------------------------------------------------
def cmd_train(args) -> int:
    config = _config(args)
    train, test = load_datasets(config)
    run_dir = unique_run_dir(Path(args.out), config.seed)
    paths = {"checkpoint": str(run_dir / CHECKPOINT), "metrics": str(run_dir / METRICS), "summary": str(run_dir / SUMMARY)}
    manifest = {
        "config": config.flat,
        "dataset": dataset_descriptor(config),
        "out_dir": str(run_dir),
        "seed": config.seed,
        "artifacts": paths,
        "version": version_string(),
    }
    (run_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"run directory: {run_dir}")

    start = time.perf_counter()
    trainer = Trainer(config, train, test)
    writer = MetricsWriter(paths["metrics"])

    def on_epoch(rec):
        writer(rec)
        print(f"epoch {rec.epoch:3d}  lr {rec.lr:.4g}  loss {rec.loss:.4f}  mi {rec.mi:.4f}  top1 {rec.top1:.4f}", flush=True)

    trainer.fit(on_epoch)
    save_checkpoint(trainer.model, paths["checkpoint"])
    final = trainer.history[-1]
    summary = {
        "version": version_string(),
        "final": asdict(final),
        "best_top1": max(r.top1 for r in trainer.history),
        "params": param_count(trainer.model.config),
        "epochs": len(trainer.history),
        "wall_seconds": time.perf_counter() - start,
        "artifacts": paths,
    }
    Path(paths["summary"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"final top1 {final.top1!r} top5 {final.top5!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt, config, model, data = _load_for_eval(args)
    metrics = parse_topk(args.topk, model.num_classes)
    z = batch_logits(model, data.images)
    out = Path(args.out) if args.out else ckpt.parent
    out.mkdir(parents=True, exist_ok=True)
    for name, k in metrics:
        acc = topk_accuracy(z, data.labels, k)
        print(f"{name} {acc!r}")
        _append_csv(out / "eval.csv", ("checkpoint", "split", "metric", "k", "accuracy"), (str(ckpt), args.split, name, k, repr(acc)))
    return EXIT_OK


def cmd_attack(args) -> int:
    epsilons = parse_epsilons(args.epsilons)
    ckpt, config, model, data = _load_for_eval(args)
    results = eval_under_attack(model, data, epsilons)
    out = Path(args.out) if args.out else ckpt.parent
    out.mkdir(parents=True, exist_ok=True)
    for eps, acc in results.items():
        print(f"epsilon {eps!r} top1 {acc!r}")
        _append_csv(out / "attack.csv", ("checkpoint", "split", "epsilon", "top1"), (str(ckpt), args.split, repr(eps), repr(acc)))
    return EXIT_OK


def cmd_preview(args) -> int:
    config = _config(args)
    train, test = load_datasets(config)
    data = train if args.split == "train" else test
    if not 0 <= args.index < len(data):
        raise ConfigError(f"index {args.index} out of range for {len(data)} {args.split} items", "--index")
    if args.views < 2:
        raise ConfigError("need at least 2 views (the positive pair)", "--views")
    mean, std = channel_stats(train)
    # normalization and batch mixing are not per-image intensity transforms
    recipe = config.recipe(mean, std).per_image().without_normalize()
    img = data.images[args.index]
    rng = make_rng(config.seed, "preview", args.split, args.index)
    pair_rng, extra_rng = rng.spawn(2)
    first, second = positive_pair(img, recipe, pair_rng)
    views = [first, second] + [standard_augment(img, recipe, r) for r in extra_rng.spawn(args.views - 2)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "ppm" if img.shape[-1] == 3 else "pgm"
    written = [write_pnm(img, out / f"source.{ext}")]
    written += [write_pnm(v, out / f"view-{i:02d}.{ext}") for i, v in enumerate(views)]
    for p in written:
        print(p)
    return EXIT_OK


def cmd_selftest(args) -> int:
    return EXIT_OK if run_selftest() else 1


def cmd_compare(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = smoothing_table(seeds, args.epochs, list(args.set or []))
    text = format_table(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------
def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="JSON config, run manifest, or preset name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--data", help="dataset root (default: $AGMAX_DATA_DIR)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agmax", description="Agreement-maximization training on numpy.")
    parser.add_argument("--version", action="version", version=f"agmax {__version__}")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write a run directory")
    _common(p)
    p.add_argument("--out", default="runs", help="parent directory for run directories")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "top-1/top-k of a checkpoint"), ("attack", cmd_attack, "FGSM accuracy of a checkpoint")):
        p = sub.add_parser(name, help=helptext)
        _common(p, config_required=False)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--split", choices=("train", "test"), default="test")
        p.add_argument("--out", help="directory for the appended CSV (default: the checkpoint's directory)")
        if name == "eval":
            p.add_argument("--topk", help="comma-separated k values (default: 1 and min(5, C))")
        else:
            p.add_argument("--epsilons", default="0,0.1,0.3,0.5", help="comma-separated FGSM strengths")
        p.set_defaults(func=func)

    p = sub.add_parser("preview", help="dump a source image and augmented views as PPM/PGM")
    _common(p)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--views", type=int, default=4, help="number of views, the first two form the positive pair")
    p.add_argument("--out", default="preview")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("selftest", help="run the quick invariant checks")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("compare", help="baseline / label smoothing / AgMax table on synthetic data")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seeds", default="0")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", default="compare")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AgmaxError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
