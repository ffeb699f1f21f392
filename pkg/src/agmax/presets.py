"""Named configurations, usable anywhere a config path is accepted.

``cifar-presets/*`` carry the CIFAR-10/100 recipe (pad 4, 16×16 CutOut,
MixUp alpha 1, CutMix alpha 1 with probability 0.5, SGD lr 0.1, weight decay
5e-4, cosine decay over 200 epochs, batch 128) on the small CNN.
``synth-presets/*`` scale the same recipe down to the 16×16 synthetic set.

Names: ``<family>/<recipe>[-agmax[-mse|-kl|-ce]]`` and ``<family>/<recipe>-ls``
for label smoothing, where recipe is one of standard, cutout, mixup,
cutmix, policy, cutout-policy, mixup-policy, cutmix-policy.
"""

from __future__ import annotations

RECIPES = ("standard", "cutout", "mixup", "cutmix", "policy", "cutout-policy", "mixup-policy", "cutmix-policy")
AGREEMENTS = {"agmax": "mi", "agmax-mse": "mse", "agmax-kl": "kl", "agmax-ce": "ce"}
LABEL_SMOOTHING = 0.1

_FAMILIES = {
    "cifar-presets": {
        "base": {
            "data.source": "cifar10",
            "data.classes": 10,
            "data.size": 32,
            "data.channels": 3,
            "train.epochs": 200,
            "train.batch_size": 128,
            "train.lr": 0.1,
            "train.momentum": 0.9,
            "train.weight_decay": 5e-4,
            "train.schedule": "cosine",
            "augment.pad": 4,
            "augment.hflip": 0.5,
        },
        "cutout": 16,
    },
    "synth-presets": {
        "base": {
            "data.source": "synth",
            "train.epochs": 30,
            "train.batch_size": 64,
            "train.lr": 0.01,
            "train.momentum": 0.9,
            "train.weight_decay": 5e-4,
            "train.schedule": "cosine",
            "augment.pad": 2,
            "augment.hflip": 0.5,
        },
        "cutout": 8,
    },
}


def _recipe_keys(recipe: str, cutout_size: int) -> dict:
    keys: dict = {}
    parts = recipe.split("-")
    if "cutout" in parts:
        keys["augment.cutout"] = cutout_size
    if "mixup" in parts:
        keys.update({"augment.mix": "mixup", "augment.mix_alpha": 1.0})
    if "cutmix" in parts:
        keys.update({"augment.mix": "cutmix", "augment.mix_alpha": 1.0, "augment.mix_p": 0.5})
    if "policy" in parts:
        keys.update({"augment.policy": "builtin:demo", "augment.policy_p": 1.0})
    return keys


def _build() -> dict[str, dict]:
    out = {}
    for family, spec in _FAMILIES.items():
        for recipe in RECIPES:
            base = {**spec["base"], **_recipe_keys(recipe, spec["cutout"])}
            out[f"{family}/{recipe}"] = dict(base)
            out[f"{family}/{recipe}-ls"] = {**base, "train.label_smoothing": LABEL_SMOOTHING}
            for suffix, kind in AGREEMENTS.items():
                out[f"{family}/{recipe}-{suffix}"] = {**base, "agreement.kind": kind, "agreement.weight": 1.0}
    return out


PRESETS = _build()
