from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import ConfigError
from . import ops
from .mixing import cutmix, mixup
from .policy import Policy, policy_augment


@dataclass(frozen=True)
class PadCrop:
    pad: int

    def __call__(self, img, rng):
        return ops.pad_crop(img, self.pad, rng)


@dataclass(frozen=True)
class HFlip:
    p: float = 0.5

    def __call__(self, img, rng):
        return ops.hflip(img, self.p, rng)


@dataclass(frozen=True)
class ColorJitter:
    """Brightness/contrast jitter standing in for ImageNet-style colour jitter."""

    brightness: float = 0.4
    contrast: float = 0.4

    def __call__(self, img, rng):
        return ops.color_jitter(img, self.brightness, self.contrast, rng)


@dataclass(frozen=True)
class PolicyStage:
    policy: Policy
    p_apply: float = 1.0

    def __call__(self, img, rng):
        u = rng.random()
        return policy_augment(img, self.policy, rng) if u < self.p_apply else img


@dataclass(frozen=True)
class Cutout:
    size: int
    fill: Union[float, tuple] = 0.0

    def __call__(self, img, rng):
        return ops.cutout(img, self.size, self.fill, rng)


@dataclass(frozen=True)
class Normalize:
    mean: tuple
    std: tuple

    def __call__(self, img, rng=None):
        return ops.normalize(img, self.mean, self.std)


@dataclass(frozen=True)
class MixUp:
    alpha: float = 1.0

    def __call__(self, images, labels, rng):
        return mixup(images, labels, self.alpha, rng)


@dataclass(frozen=True)
class CutMix:
    alpha: float = 1.0
    p: float = 0.5

    def __call__(self, images, labels, rng):
        return cutmix(images, labels, self.alpha, self.p, rng)


ImageStage = Union[PadCrop, HFlip, ColorJitter, PolicyStage, Cutout, Normalize]
BatchStage = Union[MixUp, CutMix]


@dataclass(frozen=True)
class AugmentRecipe:
    """Ordered per-image stages, then at most one batch-level mix.

    Normalization, if present, must be the final per-image stage so that
    every geometric and colour stage sees [0, 1] intensities.
    """

    stages: tuple = ()
    batch: Optional[BatchStage] = None
    # apply one shared mix to both views of a positive pair
    shared_mix: bool = True
    _norm_index: int = field(default=-1, init=False, repr=False, compare=False)

    def __post_init__(self):
        norms = [i for i, s in enumerate(self.stages) if isinstance(s, Normalize)]
        if len(norms) > 1:
            raise ConfigError("normalize may appear at most once", "augment.normalize")
        if norms and norms[0] != len(self.stages) - 1:
            raise ConfigError("normalize must be the last per-image stage", "augment.normalize")
        if self.batch is not None and not isinstance(self.batch, (MixUp, CutMix)):
            raise ConfigError(f"unsupported batch stage {self.batch!r}", "augment.mix")
        object.__setattr__(self, "_norm_index", norms[0] if norms else -1)

    @property
    def normalizer(self) -> Optional[Normalize]:
        return self.stages[self._norm_index] if self._norm_index >= 0 else None

    def intensity_stages(self) -> tuple:
        """Per-image stages that run before normalization."""
        return tuple(s for s in self.stages if not isinstance(s, Normalize))

    def per_image(self) -> "AugmentRecipe":
        return AugmentRecipe(self.stages, None, self.shared_mix)

    def without_normalize(self) -> "AugmentRecipe":
        return AugmentRecipe(self.intensity_stages(), self.batch, self.shared_mix)

    @property
    def is_identity(self) -> bool:
        return not self.stages and self.batch is None


def standard_augment(img: np.ndarray, recipe: AugmentRecipe, rng) -> np.ndarray:
    """Run the per-image stages of ``recipe`` in order on one image."""
    out = img
    for stage in recipe.stages:
        out = stage(out, rng)
    if out.shape != img.shape:
        raise ConfigError(f"augmentation changed image shape {img.shape} -> {out.shape}", "augment")
    return out if out is not img else img.copy()


def positive_pair(img: np.ndarray, recipe: AugmentRecipe, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two independent draws of the recipe on one image, from split substreams."""
    if recipe.batch is not None:
        raise ValueError("positive_pair: batch-level mixing is applied per batch, not per image")
    r1, r2 = rng.spawn(2)
    return standard_augment(img, recipe, r1), standard_augment(img, recipe, r2)
