"""Supervised two-view training: losses, SGD, schedules, loop, evaluation."""

from .losses import cross_entropy, mixed_cross_entropy, smoothed_targets, soft_cross_entropy
from .loop import (
    CSV_COLUMNS,
    LossTerms,
    MetricsRecord,
    MetricsWriter,
    Trainer,
    augment_views,
    batch_logits,
    evaluate,
    read_metrics,
    topk_accuracy,
)
from .optim import SGD, lr_at, sgd_step

__all__ = [
    "CSV_COLUMNS",
    "LossTerms",
    "MetricsRecord",
    "MetricsWriter",
    "SGD",
    "Trainer",
    "augment_views",
    "batch_logits",
    "cross_entropy",
    "evaluate",
    "lr_at",
    "mixed_cross_entropy",
    "read_metrics",
    "sgd_step",
    "smoothed_targets",
    "soft_cross_entropy",
    "topk_accuracy",
]
