"""Flat, dotted-key experiment configuration.

A config file is a JSON object whose keys are the dotted names in
``DEFAULTS`` (unknown keys are rejected). A run manifest written by the
trainer is also accepted: its ``"config"`` member is used. Overrides use
``key=value`` where value is parsed as JSON when possible, else taken as
a string.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .agreement import AgreementKind
from .augment import (
    AugmentRecipe,
    ColorJitter,
    CutMix,
    Cutout,
    HFlip,
    MixUp,
    Normalize,
    PadCrop,
    PolicyStage,
    load_policy,
)
from .data import SynthSpec
from .errors import ConfigError
from .model import EncoderConfig

DEFAULTS: dict[str, Any] = {
    "data.source": "synth",
    "data.root": None,
    "data.classes": 4,
    "data.train_per_class": 500,
    "data.test_per_class": 125,
    "data.size": 16,
    "data.channels": 3,
    "data.noise": 0.35,
    "data.seed": 0,
    "model.kind": "cnn",
    "model.widths": [8, 16],
    "model.kernel": 3,
    "model.init": "fan_in_gaussian",
    "model.init_gain": math.sqrt(2.0),
    "model.head_gain": 0.25,
    "model.init_sigma": 0.05,
    "augment.pad": 2,
    "augment.hflip": 0.5,
    "augment.jitter_brightness": 0.0,
    "augment.jitter_contrast": 0.0,
    "augment.policy": None,
    "augment.policy_p": 1.0,
    "augment.cutout": 0,
    "augment.cutout_fill": "mean",
    "augment.normalize": True,
    "augment.mix": "none",
    "augment.mix_alpha": 1.0,
    "augment.mix_p": 1.0,
    "augment.mix_shared": True,
    "agreement.kind": "none",
    "agreement.weight": 1.0,
    "agreement.raw_lambda": None,
    "agreement.estimator": "closed_form",
    "agreement.estimator_hidden": 32,
    "train.epochs": 30,
    "train.batch_size": 64,
    "train.lr": 0.01,
    "train.momentum": 0.9,
    "train.weight_decay": 5e-4,
    "train.decay_bias": True,
    "train.schedule": "cosine",
    "train.milestones": [],
    "train.factor": 0.1,
    "train.label_smoothing": 0.0,
    "train.views": None,
    "train.seed": 0,
    "train.precision": "float64",
    "eval.heldout_pairs": True,
    "log.wall_time": False,
}

_CHOICES = {
    "data.source": ("synth", "cifar10"),
    "model.kind": ("mlp", "cnn"),
    "model.init": ("fan_in_gaussian", "plain_gaussian"),
    "augment.mix": ("none", "mixup", "cutmix"),
    "agreement.kind": ("none", "mi", "mse", "kl", "ce"),
    "agreement.estimator": ("closed_form", "mlp"),
    "train.schedule": ("cosine", "step", "constant"),
    "train.precision": ("float64", "float32"),
}


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, _, value = item.partition("=")
    return key.strip(), parse_value(value.strip())


def read_config_file(path) -> dict:
    from .presets import PRESETS

    key = str(path)
    if key in PRESETS:
        return dict(PRESETS[key])
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", "--config")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}", "--config") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must hold a JSON object", "--config")
    if "config" in obj and isinstance(obj["config"], dict):
        obj = obj["config"]
    return obj


def _coerce(key: str, value, default):
    """Type-check ``value`` against the type of the default for ``key``."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        if not math.isfinite(value):
            raise ConfigError("must be finite", key)
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", key)
        return list(value)
    return value


def resolve(flat: dict, overrides: Optional[dict] = None) -> dict:
    """Merge onto the defaults and validate every field; returns a new dict."""
    merged = dict(DEFAULTS)
    for source in (flat, overrides or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError("unknown config key", key)
            merged[key] = _coerce(key, value, DEFAULTS[key])
    _validate(merged)
    return merged


def _require(cond, key, message):
    if not cond:
        raise ConfigError(message, key)


def _validate(c: dict) -> None:
    for key, choices in _CHOICES.items():
        _require(c[key] in choices, key, f"must be one of {list(choices)}, got {c[key]!r}")
    _require(c["data.classes"] >= 2, "data.classes", "must be >= 2")
    _require(c["data.size"] >= 8, "data.size", "must be >= 8")
    _require(c["data.channels"] in (1, 3), "data.channels", "must be 1 or 3")
    _require(c["data.train_per_class"] >= 1, "data.train_per_class", "must be >= 1")
    _require(c["data.test_per_class"] >= 1, "data.test_per_class", "must be >= 1")
    _require(c["data.noise"] >= 0, "data.noise", "must be >= 0")
    _require(all(isinstance(w, int) and w >= 1 for w in c["model.widths"]), "model.widths", "widths must be integers >= 1")
    _require(c["model.kind"] == "mlp" or len(c["model.widths"]) >= 1, "model.widths", "a cnn needs at least one conv stage")
    _require(c["model.init_sigma"] > 0, "model.init_sigma", "must be > 0")
    _require(c["model.init_gain"] > 0, "model.init_gain", "must be > 0")
    _require(c["model.head_gain"] >= 0, "model.head_gain", "must be >= 0")
    _require(c["augment.pad"] >= 0, "augment.pad", "must be >= 0")
    _require(0 <= c["augment.hflip"] <= 1, "augment.hflip", "must lie in [0, 1]")
    _require(c["augment.cutout"] >= 0, "augment.cutout", "must be >= 0")
    fill = c["augment.cutout_fill"]
    _require(fill == "mean" or (isinstance(fill, (int, float)) and not isinstance(fill, bool)), "augment.cutout_fill", "must be \"mean\" or a number")
    _require(0 <= c["augment.jitter_brightness"] < 1, "augment.jitter_brightness", "must lie in [0, 1)")
    _require(0 <= c["augment.jitter_contrast"] < 1, "augment.jitter_contrast", "must lie in [0, 1)")
    _require(0 <= c["augment.policy_p"] <= 1, "augment.policy_p", "must lie in [0, 1]")
    if c["augment.policy"] is not None:
        load_policy(c["augment.policy"])
    _require(c["augment.mix_alpha"] > 0, "augment.mix_alpha", "must be > 0")
    _require(0 <= c["augment.mix_p"] <= 1, "augment.mix_p", "must lie in [0, 1]")
    _require(c["agreement.weight"] >= 0, "agreement.weight", "must be >= 0 (see agreement.raw_lambda)")
    raw = c["agreement.raw_lambda"]
    _require(raw is None or (isinstance(raw, (int, float)) and not isinstance(raw, bool) and math.isfinite(raw)), "agreement.raw_lambda", "must be null or a number")
    _require(c["agreement.estimator_hidden"] >= 1, "agreement.estimator_hidden", "must be >= 1")
    _require(c["agreement.estimator"] == "closed_form" or c["agreement.kind"] == "mi", "agreement.estimator", "the mlp estimator only applies to agreement.kind=mi")
    _require(c["train.epochs"] >= 1, "train.epochs", "must be >= 1")
    _require(c["train.batch_size"] >= (2 if c["augment.mix"] != "none" else 1), "train.batch_size", "too small (mixing needs >= 2)")
    _require(c["train.lr"] > 0, "train.lr", "must be > 0")
    _require(0 <= c["train.momentum"] < 1, "train.momentum", "must lie in [0, 1)")
    _require(c["train.weight_decay"] >= 0, "train.weight_decay", "must be >= 0")
    ms = c["train.milestones"]
    _require(all(isinstance(m, int) and m >= 0 for m in ms), "train.milestones", "must be non-negative integers")
    _require(all(a < b for a, b in zip(ms, ms[1:])), "train.milestones", "must be strictly increasing")
    _require(c["train.factor"] > 0, "train.factor", "must be > 0")
    _require(0 <= c["train.label_smoothing"] < 1, "train.label_smoothing", "must lie in [0, 1)")
    views = c["train.views"]
    _require(views in (None, 1, 2), "train.views", "must be null, 1 or 2")
    _require(not (views == 1 and c["agreement.kind"] != "none"), "train.views", "agreement needs two views")
    _require(c["train.seed"] >= 0 and c["data.seed"] >= 0, "train.seed", "seeds must be >= 0")
    if c["data.source"] == "cifar10":
        _require(c["data.classes"] == 10 and c["data.size"] == 32 and c["data.channels"] == 3, "data.source", "cifar10 implies classes=10, size=32, channels=3")


@dataclass(frozen=True)
class TrainConfig:
    """Typed view over a resolved flat config."""

    flat: dict

    @classmethod
    def from_flat(cls, flat: dict, overrides: Optional[dict] = None) -> "TrainConfig":
        return cls(resolve(flat, overrides))

    def __getitem__(self, key):
        return self.flat[key]

    @property
    def epochs(self) -> int:
        return self.flat["train.epochs"]

    @property
    def batch_size(self) -> int:
        return self.flat["train.batch_size"]

    @property
    def lr(self) -> float:
        return self.flat["train.lr"]

    @property
    def seed(self) -> int:
        return self.flat["train.seed"]

    @property
    def label_smoothing(self) -> float:
        return self.flat["train.label_smoothing"]

    @property
    def dtype(self):
        return np.dtype(self.flat["train.precision"])

    @property
    def views(self) -> int:
        v = self.flat["train.views"]
        if v is None:
            return 2 if self.flat["agreement.kind"] != "none" else 1
        return v

    @property
    def agreement(self) -> Optional[AgreementKind]:
        kind = self.flat["agreement.kind"]
        if kind == "none":
            return None
        raw = self.flat["agreement.raw_lambda"]
        if raw is not None:
            # user gave the signed weight on L_MI = -I directly
            return AgreementKind(kind, float(raw), literal=True)
        return AgreementKind(kind, self.flat["agreement.weight"])

    def synth_spec(self) -> SynthSpec:
        f = self.flat
        return SynthSpec(
            classes=f["data.classes"],
            train_per_class=f["data.train_per_class"],
            test_per_class=f["data.test_per_class"],
            size=f["data.size"],
            channels=f["data.channels"],
            noise=f["data.noise"],
            seed=f["data.seed"],
        )

    def encoder(self, input_shape, num_classes) -> EncoderConfig:
        f = self.flat
        return EncoderConfig(
            kind=f["model.kind"],
            input_shape=tuple(int(d) for d in input_shape),
            num_classes=int(num_classes),
            widths=tuple(f["model.widths"]),
            kernel=f["model.kernel"],
            init=f["model.init"],
            gain=f["model.init_gain"],
            head_gain=f["model.head_gain"],
            sigma=f["model.init_sigma"],
            dtype=f["train.precision"],
        )

    def recipe(self, mean=None, std=None) -> AugmentRecipe:
        """Build the augmentation recipe; ``mean``/``std`` are train-split stats."""
        f = self.flat
        stages = []
        if f["augment.pad"] > 0:
            stages.append(PadCrop(f["augment.pad"]))
        if f["augment.hflip"] > 0:
            stages.append(HFlip(f["augment.hflip"]))
        if f["augment.policy"] is not None:
            stages.append(PolicyStage(load_policy(f["augment.policy"]), f["augment.policy_p"]))
        if f["augment.jitter_brightness"] > 0 or f["augment.jitter_contrast"] > 0:
            stages.append(ColorJitter(f["augment.jitter_brightness"], f["augment.jitter_contrast"]))
        if f["augment.cutout"] > 0:
            fill = f["augment.cutout_fill"]
            if fill == "mean":
                fill = tuple(float(m) for m in mean) if mean is not None else 0.5
            stages.append(Cutout(f["augment.cutout"], fill))
        if f["augment.normalize"] and mean is not None:
            stages.append(Normalize(tuple(float(m) for m in mean), tuple(float(s) for s in std)))
        batch = None
        if f["augment.mix"] == "mixup":
            batch = MixUp(f["augment.mix_alpha"])
        elif f["augment.mix"] == "cutmix":
            batch = CutMix(f["augment.mix_alpha"], f["augment.mix_p"])
        return AugmentRecipe(tuple(stages), batch, f["augment.mix_shared"])


def load_config(path, overrides: Optional[list[str]] = None, seed: Optional[int] = None) -> TrainConfig:
    flat = read_config_file(path)
    extra = dict(parse_override(o) for o in overrides or [])
    if seed is not None:
        extra["train.seed"] = seed
    return TrainConfig.from_flat(flat, extra)
