from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..augment import MixedLabels
from ..diffcore import Node


def smoothed_targets(labels, num_classes: int, smoothing: float, dtype=np.float64) -> np.ndarray:
    if not 0.0 <= smoothing < 1.0:
        raise ValueError("label smoothing must lie in [0, 1)")
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes}), got max {labels.max()}")
    t = dc.one_hot(labels, num_classes, dtype).value
    if smoothing:
        t = (1.0 - smoothing) * t + smoothing / num_classes
    return t


def soft_cross_entropy(logits: Node, targets: np.ndarray) -> Node:
    """Batch mean of -sum_c t_c log softmax(z)_c."""
    logp = dc.log(dc.softmax(logits))
    return -dc.mean(dc.sum(Node(targets.astype(logits.dtype)) * logp, axis=1))


def cross_entropy(logits: Node, labels, smoothing: float = 0.0) -> Node:
    c = logits.shape[1]
    return soft_cross_entropy(logits, smoothed_targets(labels, c, smoothing, logits.dtype))


def mixed_cross_entropy(logits: Node, mixed: MixedLabels, smoothing: float = 0.0) -> Node:
    """lam * CE(label_a) + (1 - lam) * CE(label_b), per item, batch-averaged.

    CE is linear in the target, so this is CE against the mixed target.
    """
    c = logits.shape[1]
    ta = smoothed_targets(mixed.label_a, c, smoothing, logits.dtype)
    tb = smoothed_targets(mixed.label_b, c, smoothing, logits.dtype)
    lam = np.asarray(mixed.lam, dtype=logits.dtype)[:, None]
    return soft_cross_entropy(logits, lam * ta + (1.0 - lam) * tb)
