from __future__ import annotations

import math

import numpy as np

from ..diffcore import ParameterStore
from ..errors import NumericError


class SGD:
    """Heavy-ball SGD with L2 weight decay folded into the gradient.

    v <- momentum * v + grad + weight_decay * param
    param <- param - lr * v
    """

    def __init__(self, momentum: float = 0.9, weight_decay: float = 0.0, decay_bias: bool = True):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.decay_bias = decay_bias
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, store: ParameterStore, lr: float) -> None:
        for name, p in store:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
        for name, p in store:
            g = p.grad
            wd = self.weight_decay if (self.decay_bias or not name.endswith("bias")) else 0.0
            if wd:
                g = g + wd * p.value
            v = self.velocity.get(name)
            v = g if v is None else self.momentum * v + g
            self.velocity[name] = v
            p.value = p.value - lr * v
            p.zero_grad()


def sgd_step(store: ParameterStore, lr: float, momentum: float, weight_decay: float, optimizer: SGD | None = None) -> SGD:
    """Functional form: one update, returning the optimizer carrying velocity."""
    opt = optimizer or SGD(momentum, weight_decay)
    opt.momentum, opt.weight_decay = momentum, weight_decay
    opt.step(store, lr)
    return opt


def lr_at(config, epoch: float) -> float:
    """Learning rate for ``epoch`` (0-based, epoch-granular)."""
    base = config["train.lr"]
    schedule = config["train.schedule"]
    if schedule == "constant":
        return base
    if schedule == "step":
        passed = sum(1 for m in config["train.milestones"] if epoch >= m)
        return base * config["train.factor"] ** passed
    return 0.5 * base * (1.0 + math.cos(math.pi * epoch / config["train.epochs"]))
