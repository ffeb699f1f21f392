"""Agreement between the prediction distributions of two views.

The default agreement is the mutual information of the C×C joint formed by
averaging outer products of the two views' softmax outputs over the batch.
MSE, symmetric KL and stop-gradient cross-entropy are the alternatives.
All losses follow one sign convention: smaller means more agreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .diffcore import Node, as_node
from .errors import ConfigError, ShapeError

KINDS = ("mi", "mse", "kl", "ce")


@dataclass(frozen=True)
class AgreementKind:
    kind: str = "mi"
    weight: float = 1.0
    # permit a negative weight, i.e. the literal reading of L = CE + lambda * (-I)
    literal: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown agreement kind {self.kind!r}; expected one of {KINDS}", "agreement.kind")
        if not np.isfinite(self.weight):
            raise ConfigError("weight must be finite", "agreement.weight")
        if self.weight < 0 and not self.literal:
            raise ConfigError("weight must be >= 0 (use agreement.raw_lambda for a signed weight)", "agreement.weight")


def _check_distributions(phi: Node, name: str, tol: float = 1e-6) -> None:
    v = phi.value
    if v.ndim != 2 or v.shape[0] < 1:
        raise ShapeError("joint_matrix", v.shape, ("n", "C"), detail=f"{name} must be n x C with n >= 1")
    if np.any(v < -tol) or np.any(np.abs(v.sum(axis=1) - 1.0) > tol):
        raise ValueError(f"joint_matrix: rows of {name} are not probability distributions")


def joint_matrix(phi1, phi2, validate: bool = True) -> Node:
    """Symmetrized batch-average of outer(phi1_i, phi2_i)."""
    phi1, phi2 = as_node(phi1), as_node(phi2)
    if phi1.shape != phi2.shape:
        raise ShapeError("joint_matrix", phi1.shape, phi2.shape)
    if validate:
        _check_distributions(phi1, "phi1")
        _check_distributions(phi2, "phi2")
    n = phi1.shape[0]
    p = dc.matmul(dc.transpose(phi1), phi2) * (1.0 / n)
    return (p + dc.transpose(p)) * 0.5


def check_joint(p: Node, tol: float = 1e-9) -> None:
    v = p.value
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ShapeError("mutual_information", v.shape, ("C", "C"))
    if np.any(v < -tol) or abs(float(v.sum()) - 1.0) > tol:
        raise ValueError("mutual_information: argument is not a valid joint distribution")


def mutual_information(p, validate: bool = True) -> Node:
    """Sum of P * ln(P / (row marginal * column marginal)), floored logs."""
    p = as_node(p)
    if validate:
        check_joint(p)
    c = p.shape[0]
    rows = dc.reshape(dc.sum(p, axis=1), (c, 1))
    cols = dc.reshape(dc.sum(p, axis=0), (1, c))
    indep = dc.matmul(rows, cols)
    return dc.sum(p * (dc.log(p) - dc.log(indep)))


def mi_loss(z1: Node, z2: Node) -> Node:
    p = joint_matrix(dc.softmax(z1), dc.softmax(z2), validate=False)
    return -mutual_information(p, validate=False)


def mse_loss(z1: Node, z2: Node) -> Node:
    d = dc.softmax(z1) - dc.softmax(z2)
    return dc.mean(d * d)


def kl_loss(z1: Node, z2: Node) -> Node:
    # 0.5 * (KL(p1||p2) + KL(p2||p1)) = 0.5 * sum (p1 - p2)(log p1 - log p2)
    p1, p2 = dc.softmax(z1), dc.softmax(z2)
    per_item = dc.sum((p1 - p2) * (dc.log(p1) - dc.log(p2)), axis=1)
    return dc.mean(per_item) * 0.5


def ce_with_targets(z1: Node, z2: Node, t1, t2) -> Node:
    """-0.5 * mean(sum(t1 log p2 + t2 log p1)); targets are constants."""
    p1, p2 = dc.softmax(z1), dc.softmax(z2)
    per_item = dc.sum(dc.as_node(t1) * dc.log(p2) + dc.as_node(t2) * dc.log(p1), axis=1)
    return dc.mean(per_item) * -0.5


def ce_loss(z1: Node, z2: Node) -> Node:
    # each view's prediction is the other's target with no gradient through it
    t1, t2 = dc.stop_gradient(dc.softmax(z1)), dc.stop_gradient(dc.softmax(z2))
    return ce_with_targets(z1, z2, t1, t2)


def frozen_ce_reference(z1, z2) -> tuple:
    """Constant targets at (z1, z2), for numeric checks of ``ce_loss``."""
    return dc.softmax(as_node(z1)).value.copy(), dc.softmax(as_node(z2)).value.copy()


_LOSSES = {"mi": mi_loss, "mse": mse_loss, "kl": kl_loss, "ce": ce_loss}


def agreement_loss(z1, z2, kind="mi") -> Node:
    """Agreement loss between two n×C logit batches."""
    name = kind.kind if isinstance(kind, AgreementKind) else kind
    z1, z2 = as_node(z1), as_node(z2)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise ShapeError("agreement_loss", z1.shape, z2.shape)
    if z1.shape[1] < 2:
        raise ValueError("agreement_loss: need at least 2 classes")
    if name not in _LOSSES:
        raise ConfigError(f"unknown agreement kind {name!r}", "agreement.kind")
    return _LOSSES[name](z1, z2)


def total_loss(ce: Node, agree: Node, w: float = 1.0) -> Node:
    if ce.value.size != 1 or agree.value.size != 1:
        raise ShapeError("total_loss", ce.shape, agree.shape, detail="both terms must be scalar")
    if w == 0:
        return ce
    return ce + agree * float(w)


def heldout_mi(z1: np.ndarray, z2: np.ndarray) -> float:
    """Agreement I(z1; z2) in nats for two logit arrays, no graph kept."""
    p = joint_matrix(dc.softmax(as_node(z1)), dc.softmax(as_node(z2)), validate=False)
    return float(mutual_information(p, validate=False).value)


class MLPJointEstimator:
    """Two-layer MLP that maps a pair of prediction vectors to a C×C joint.

    The per-item estimate is a softmax over the C² cells of the MLP output
    applied to ``concat(phi1, phi2)``; the batch estimate is its mean,
    symmetrized. ``fit_loss`` trains it toward the self-joints
    ``outer(phi1, phi1)`` and ``outer(phi2, phi2)`` of the pair.
    """

    def __init__(self, num_classes: int, hidden: int, rng, store=None, prefix: str = "joint", dtype=np.float64):
        if hidden < 1:
            raise ConfigError("hidden width must be >= 1", "agreement.estimator_hidden")
        c = num_classes
        self.num_classes = c
        self.store = store if store is not None else dc.ParameterStore()
        self.prefix = prefix
        s1 = np.sqrt(2.0 / (2 * c))
        s2 = np.sqrt(1.0 / hidden)
        self.w1 = self.store.add(f"{prefix}.w1", rng.normal(0.0, s1, (2 * c, hidden)), dtype)
        self.b1 = self.store.add(f"{prefix}.b1", np.zeros(hidden), dtype)
        self.w2 = self.store.add(f"{prefix}.w2", rng.normal(0.0, s2, (hidden, c * c)), dtype)
        self.b2 = self.store.add(f"{prefix}.b2", np.zeros(c * c), dtype)

    def per_item(self, phi1, phi2) -> Node:
        x = dc.concat([as_node(phi1), as_node(phi2)], axis=1)
        h = dc.relu(dc.bias_add(dc.matmul(x, self.w1), self.b1))
        return dc.softmax(dc.bias_add(dc.matmul(h, self.w2), self.b2))

    def estimate(self, phi1, phi2) -> Node:
        c = self.num_classes
        q = dc.reshape(dc.mean(self.per_item(phi1, phi2), axis=0), (c, c))
        return (q + dc.transpose(q)) * 0.5

    def fit_loss(self, phi1, phi2) -> Node:
        """Cross-entropy of the per-item estimate against the two self-joints.

        Inputs are treated as constants; only the estimator learns from this.
        """
        a = np.asarray(as_node(phi1).value)
        b = np.asarray(as_node(phi2).value)
        n, c = a.shape
        target = 0.5 * (np.einsum("ni,nj->nij", a, a) + np.einsum("ni,nj->nij", b, b)).reshape(n, c * c)
        q = self.per_item(a, b)
        return dc.mean(dc.sum(Node(target) * dc.log(q), axis=1)) * -1.0
