"""Image augmentation: standard, regional dropout, policy-based, positive pairs."""

from .mixing import (
    MixedLabels,
    MixParams,
    apply_cutmix,
    apply_mixup,
    cut_box,
    cutmix,
    draw_cutmix,
    draw_mixup,
    mixup,
)
from .ops import cutout, cutout_at, hflip, normalize, pad_crop, shift_crop, square_box
from .policy import DEMO_POLICY, OPS, Policy, load_policy, policy_augment
from .recipe import (
    AugmentRecipe,
    ColorJitter,
    CutMix,
    Cutout,
    HFlip,
    MixUp,
    Normalize,
    PadCrop,
    PolicyStage,
    positive_pair,
    standard_augment,
)

__all__ = [
    "AugmentRecipe",
    "ColorJitter",
    "CutMix",
    "Cutout",
    "DEMO_POLICY",
    "HFlip",
    "MixParams",
    "MixUp",
    "MixedLabels",
    "Normalize",
    "OPS",
    "PadCrop",
    "Policy",
    "PolicyStage",
    "apply_cutmix",
    "apply_mixup",
    "cut_box",
    "cutmix",
    "cutout",
    "cutout_at",
    "draw_cutmix",
    "draw_mixup",
    "hflip",
    "load_policy",
    "mixup",
    "normalize",
    "pad_crop",
    "policy_augment",
    "positive_pair",
    "shift_crop",
    "square_box",
    "standard_augment",
]
