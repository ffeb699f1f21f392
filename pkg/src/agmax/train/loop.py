"""Two-view training loop.

Per step: each image in the batch yields a positive pair from split random
substreams; an optional batch-level mix is drawn once and (by default)
applied identically to both views; both views go through the one shared
parameter store in a single concatenated forward; the CE term averages the
two views and the agreement term compares their logits.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import diffcore as dc
from ..agreement import MLPJointEstimator, agreement_loss, heldout_mi, mutual_information, total_loss
from ..augment import (
    AugmentRecipe,
    CutMix,
    MixedLabels,
    MixUp,
    apply_cutmix,
    apply_mixup,
    draw_cutmix,
    draw_mixup,
    positive_pair,
    standard_augment,
)
from ..config import TrainConfig
from ..data import Dataset, channel_stats
from ..diffcore import Node
from ..errors import NumericError
from ..model import Model, create_model, topk_hits
from ..rng import make_rng
from .losses import mixed_cross_entropy
from .optim import SGD, lr_at

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epoch", "lr", "loss", "ce", "agree", "mi", "top1", "top5", "seconds")
EVAL_CHUNK = 250


@dataclass
class LossTerms:
    total: float
    ce: float
    agree: float


@dataclass
class MetricsRecord:
    epoch: int
    lr: float
    loss: float
    ce: float
    agree: float
    mi: float
    top1: float
    top5: float
    seconds: float

    def row(self) -> list[str]:
        return [str(self.epoch)] + [repr(float(getattr(self, k))) for k in CSV_COLUMNS[1:]]


def batch_logits(model: Model, images: np.ndarray, chunk: int = EVAL_CHUNK) -> np.ndarray:
    parts = [model.logits(images[i : i + chunk]).value for i in range(0, len(images), chunk)]
    if not parts:
        return np.zeros((0, model.num_classes))
    return np.concatenate(parts)


def topk_accuracy(logits: np.ndarray, labels, k: int) -> float:
    return float(topk_hits(logits, labels, k).mean())


def evaluate(model: Model, dataset: Dataset) -> tuple[float, float]:
    """Single-view top-1 and top-5 on raw images (normalization only).

    With fewer than 5 classes the second number is top-C accuracy, i.e. 1.0.
    """
    if len(dataset) == 0:
        raise ValueError("evaluate: empty dataset")
    z = batch_logits(model, dataset.images)
    k5 = min(5, model.num_classes)
    return topk_accuracy(z, dataset.labels, 1), topk_accuracy(z, dataset.labels, k5)


def augment_views(images: np.ndarray, recipe: AugmentRecipe, rng, views: int) -> list[np.ndarray]:
    """Per-image stages for every item; one or two views each."""
    item_rngs = rng.spawn(len(images))
    if views == 1:
        return [np.stack([standard_augment(x, recipe, r) for x, r in zip(images, item_rngs)])]
    pairs = [positive_pair(x, recipe, r) for x, r in zip(images, item_rngs)]
    return [np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])]


def heldout_pairs(dataset: Dataset, recipe: AugmentRecipe, seed: int) -> tuple[np.ndarray, np.ndarray]:
    v1, v2 = augment_views(dataset.images, recipe.per_image().without_normalize(), make_rng(seed, "heldout"), 2)
    return v1, v2


class Trainer:
    def __init__(self, config: TrainConfig, train: Dataset, test: Dataset):
        self.config = config
        self.train = train
        self.test = test
        dtype = config.dtype
        mean, std = channel_stats(train) if config["augment.normalize"] else (None, None)
        self.recipe = config.recipe(mean, std)
        # normalization is the model's input layer; the loop runs only intensity stages
        self.intensity_recipe = self.recipe.per_image().without_normalize()
        enc = config.encoder(train.image_shape, train.num_classes)
        self.model = create_model(enc, make_rng(config.seed, "init"), mean, std)
        self.agreement = config.agreement
        self.views = config.views
        self.estimator = None
        if self.agreement is not None and config["agreement.estimator"] == "mlp":
            self.estimator = MLPJointEstimator(
                train.num_classes, config["agreement.estimator_hidden"], make_rng(config.seed, "estimator"),
                store=self.model.store, dtype=dtype,
            )
        self.opt = SGD(config["train.momentum"], config["train.weight_decay"], config["train.decay_bias"])
        self._heldout = None
        self.history: list[MetricsRecord] = []

    # -- one step ---------------------------------------------------------
    def _mix(self, views: list[np.ndarray], labels: np.ndarray, rng) -> tuple[list[np.ndarray], list[MixedLabels]]:
        stage = self.recipe.batch
        if stage is None:
            return views, [MixedLabels.unmixed(labels)] * len(views)
        n, h, w = views[0].shape[:3]

        def draw():
            if isinstance(stage, MixUp):
                return draw_mixup(n, stage.alpha, rng)
            return draw_cutmix(n, h, w, stage.alpha, stage.p, rng)

        apply = apply_mixup if isinstance(stage, MixUp) else apply_cutmix
        params = draw()
        out, mixed = [], []
        for i, v in enumerate(views):
            if i > 0 and not self.recipe.shared_mix:
                params = draw()
            x, m = apply(v, labels, params)
            out.append(x)
            mixed.append(m)
        return out, mixed

    def train_step(self, images: np.ndarray, labels: np.ndarray, rng, lr: float) -> LossTerms:
        views = augment_views(images, self.intensity_recipe, rng, self.views)
        views, mixed = self._mix(views, labels, rng)
        n = len(labels)
        x = np.concatenate(views) if len(views) > 1 else views[0]
        logits = self.model.logits(x.astype(self.config.dtype))
        both = MixedLabels(
            np.concatenate([m.label_a for m in mixed]),
            np.concatenate([m.label_b for m in mixed]),
            np.concatenate([m.lam for m in mixed]),
        )
        ce = mixed_cross_entropy(logits, both, self.config.label_smoothing)
        agree_value = 0.0
        total = ce
        if self.agreement is not None:
            z1, z2 = logits[:n], logits[n:]
            if self.estimator is not None:
                p1, p2 = dc.softmax(z1), dc.softmax(z2)
                agree = -mutual_information(self.estimator.estimate(p1, p2), validate=False)
                total = total_loss(ce, agree, self.agreement.weight) + self.estimator.fit_loss(p1, p2)
            else:
                agree = agreement_loss(z1, z2, self.agreement.kind)
                total = total_loss(ce, agree, self.agreement.weight)
            agree_value = float(agree.value)
        if not total.is_finite():
            raise NumericError("non-finite training loss")
        dc.backward(total)
        self.opt.step(self.model.store, lr)
        return LossTerms(float(total.value), float(ce.value), agree_value)

    # -- epochs -----------------------------------------------------------
    def heldout_mi(self) -> float:
        if not self.config["eval.heldout_pairs"]:
            return 0.0
        if self._heldout is None:
            self._heldout = heldout_pairs(self.test, self.recipe, self.config.seed)
        v1, v2 = self._heldout
        return heldout_mi(batch_logits(self.model, v1), batch_logits(self.model, v2))

    def run_epoch(self, epoch: int) -> MetricsRecord:
        start = time.perf_counter()
        cfg = self.config
        lr = lr_at(cfg.flat, epoch)
        order = make_rng(cfg.seed, "shuffle", epoch).permutation(len(self.train))
        bs = cfg.batch_size
        totals = np.zeros(3)
        count = 0
        min_batch = 2 if self.recipe.batch is not None else 1
        for step, lo in enumerate(range(0, len(order), bs)):
            idx = order[lo : lo + bs]
            if len(idx) < min_batch:
                continue
            try:
                terms = self.train_step(self.train.images[idx], self.train.labels[idx], make_rng(cfg.seed, "step", epoch, step), lr)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch} step {step}: {exc}") from exc
            totals += len(idx) * np.array([terms.total, terms.ce, terms.agree])
            count += len(idx)
        loss, ce, agree = totals / max(count, 1)
        top1, top5 = evaluate(self.model, self.test)
        mi = self.heldout_mi()
        seconds = time.perf_counter() - start if cfg["log.wall_time"] else 0.0
        rec = MetricsRecord(epoch, lr, loss, ce, agree, mi, top1, top5, seconds)
        self.history.append(rec)
        log.info("epoch %d lr %.4g loss %.4f ce %.4f agree %.4f mi %.4f top1 %.4f", epoch, lr, loss, ce, agree, mi, top1)
        return rec

    def fit(self, on_epoch: Optional[Callable[[MetricsRecord], None]] = None) -> list[MetricsRecord]:
        for epoch in range(len(self.history), self.config.epochs):
            rec = self.run_epoch(epoch)
            if on_epoch is not None:
                on_epoch(rec)
        return self.history


class MetricsWriter:
    """Appends MetricsRecord rows to a CSV with the fixed column order."""

    def __init__(self, path):
        self.path = Path(path)
        with self.path.open("w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(CSV_COLUMNS)

    def __call__(self, rec: MetricsRecord) -> None:
        with self.path.open("a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(rec.row())


def read_metrics(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "epoch" else float(v)) for k, v in r.items()} for r in rows]


def record_dict(rec: MetricsRecord) -> dict:
    return asdict(rec)
