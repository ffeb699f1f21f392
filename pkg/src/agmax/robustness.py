"""White-box FGSM and Gaussian-noise evaluation.

Perturbations live in raw intensity space ([0, 1] by default); the model's
input normalization is part of the differentiated function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .data import Dataset
from .diffcore import Node
from .model import Model
from .rng import make_rng
from .train.loop import EVAL_CHUNK, evaluate
from .train.losses import cross_entropy


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    clip: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.clip[0] > self.clip[1]:
            raise ValueError("clip range is empty")


def input_gradient(model: Model, images: np.ndarray, labels) -> np.ndarray:
    """d CE / d x for raw-intensity images (batch-mean CE, no smoothing)."""
    x = Node(np.asarray(images, dtype=model.mean.dtype), requires_grad=True)
    loss = cross_entropy(model.logits(x), labels)
    dc.backward(loss)
    return x.grad


def fgsm(model: Model, images: np.ndarray, labels, config: AttackConfig) -> np.ndarray:
    """x + eps * sign(grad_x CE), clipped; sign(0) = 0."""
    images = np.asarray(images, dtype=model.mean.dtype)
    if config.epsilon == 0:
        return images.copy()
    out = np.empty_like(images)
    labels = np.asarray(labels)
    for i in range(0, len(images), EVAL_CHUNK):
        sl = slice(i, i + EVAL_CHUNK)
        g = input_gradient(model, images[sl], labels[sl])
        out[sl] = np.clip(images[sl] + config.epsilon * np.sign(g), *config.clip)
    return out


def eval_under_attack(model: Model, dataset: Dataset, epsilons, clip=(0.0, 1.0)) -> dict[float, float]:
    """Top-1 on FGSM inputs for each epsilon, via the clean evaluation path."""
    epsilons = list(epsilons)
    if not epsilons:
        raise ValueError("need at least one epsilon")
    out = {}
    for eps in epsilons:
        adv = fgsm(model, dataset.images, dataset.labels, AttackConfig(float(eps), tuple(clip)))
        top1, _ = evaluate(model, Dataset(adv, dataset.labels, dataset.num_classes, dataset.split))
        out[float(eps)] = top1
    return out


def gaussian_corruption_eval(model: Model, dataset: Dataset, sigmas, seed: int = 0) -> dict[float, float]:
    out = {}
    for i, sigma in enumerate(sigmas):
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        if sigma == 0:
            noisy = dataset.images
        else:
            rng = make_rng(seed, "corruption", i)
            noisy = np.clip(dataset.images + rng.normal(0.0, sigma, dataset.images.shape), 0.0, 1.0)
        top1, _ = evaluate(model, Dataset(noisy, dataset.labels, dataset.num_classes, dataset.split))
        out[float(sigma)] = top1
    return out
