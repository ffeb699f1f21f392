"""Batch-level MixUp and CutMix.

Each draws a single mixing weight and a single permutation per batch. The
``draw_*`` functions return the random parameters so that the same mix can
be replayed on the second view of a positive pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class MixedLabels:
    label_a: np.ndarray
    label_b: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        if not (self.label_a.shape == self.label_b.shape == self.lam.shape):
            raise ShapeError("MixedLabels", self.label_a.shape, self.label_b.shape, self.lam.shape)
        if np.any(self.lam < 0) or np.any(self.lam > 1):
            raise ValueError("MixedLabels: lambda must lie in [0, 1]")

    @classmethod
    def unmixed(cls, labels) -> "MixedLabels":
        labels = np.asarray(labels)
        return cls(labels, labels.copy(), np.ones(labels.shape, dtype=np.float64))


@dataclass(frozen=True)
class MixParams:
    perm: np.ndarray
    lam: float
    # clipped (y0, y1, x0, x1); None for MixUp or when CutMix was skipped
    box: Optional[tuple] = None
    applied: bool = True


def _check_batch(images, labels, op):
    if images.ndim != 4:
        raise ShapeError(op, images.shape, ("n", "H", "W", "Ch"))
    if len(labels) != images.shape[0]:
        raise ShapeError(op, images.shape, np.shape(labels))
    if images.shape[0] < 2:
        raise ValueError(f"{op}: batch size must be >= 2")


def draw_mixup(n: int, alpha: float, rng) -> MixParams:
    if alpha <= 0:
        raise ValueError("mixup: alpha must be > 0")
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(n)
    return MixParams(perm, lam)


def apply_mixup(images, labels, params: MixParams):
    lam, perm = params.lam, params.perm
    labels = np.asarray(labels)
    out = lam * images + (1.0 - lam) * images[perm]
    mixed = MixedLabels(labels, labels[perm], np.full(labels.shape, lam))
    return out, mixed


def mixup(images: np.ndarray, labels, alpha: float, rng):
    _check_batch(images, labels, "mixup")
    return apply_mixup(images, labels, draw_mixup(images.shape[0], alpha, rng))


def cut_box(h: int, w: int, lam: float, cy: int, cx: int) -> tuple[int, int, int, int]:
    """Clipped box of size (H·sqrt(1-lam), W·sqrt(1-lam)) centred on (cy, cx)."""
    r = np.sqrt(1.0 - lam)
    bh, bw = int(h * r), int(w * r)
    y0 = cy - bh // 2
    x0 = cx - bw // 2
    return max(y0, 0), min(y0 + bh, h), max(x0, 0), min(x0 + bw, w)


def draw_cutmix(n: int, h: int, w: int, alpha: float, p_apply: float, rng) -> MixParams:
    if alpha <= 0:
        raise ValueError("cutmix: alpha must be > 0")
    if not 0.0 <= p_apply <= 1.0:
        raise ValueError("cutmix: p_apply must lie in [0, 1]")
    # fixed draw order regardless of the coin, keeps streams aligned
    coin = rng.random()
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(n)
    cy = int(rng.integers(0, h))
    cx = int(rng.integers(0, w))
    if coin >= p_apply:
        return MixParams(perm, 1.0, None, applied=False)
    return MixParams(perm, lam, cut_box(h, w, lam, cy, cx))


def apply_cutmix(images, labels, params: MixParams):
    labels = np.asarray(labels)
    if not params.applied or params.box is None:
        return images.copy(), MixedLabels.unmixed(labels)
    y0, y1, x0, x1 = params.box
    h, w = images.shape[1:3]
    area = max(y1 - y0, 0) * max(x1 - x0, 0)
    out = images.copy()
    if area:
        out[:, y0:y1, x0:x1] = images[params.perm, y0:y1, x0:x1]
    lam_adj = 1.0 - area / float(h * w)
    return out, MixedLabels(labels, labels[params.perm], np.full(labels.shape, lam_adj))


def cutmix(images: np.ndarray, labels, alpha: float, p_apply: float, rng):
    _check_batch(images, labels, "cutmix")
    n, h, w = images.shape[:3]
    return apply_cutmix(images, labels, draw_cutmix(n, h, w, alpha, p_apply, rng))
