"""Central-difference verification of backward rules."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..errors import GradCheckError
from .node import Node, backward


def numeric_grad(f: Callable[[Node], Node], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = _scalar(f(Node(x.copy())))
        flat[i] = orig - h
        fm = _scalar(f(Node(x.copy())))
        flat[i] = orig
        out.reshape(-1)[i] = (fp - fm) / (2.0 * h)
    return out


def _scalar(node: Node) -> float:
    if node.value.size != 1:
        raise GradCheckError(f"grad_check needs a scalar function, got shape {node.shape}")
    v = float(node.value.reshape(-1)[0])
    if not np.isfinite(v):
        raise GradCheckError(f"function value is not finite ({v})")
    return v


def grad_check(
    f: Callable[[Node], Node],
    x,
    h: float = 1e-5,
    floor: float = 1e-5,
    reference: Optional[Callable[[Node], Node]] = None,
) -> float:
    """Max over coordinates of ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.

    ``floor`` keeps coordinates whose true derivative is ~0 from turning
    finite-difference error into a huge relative error. Central differences
    are off by about h**2 * f'''(x) / 6, i.e. 1e-10 at the default step, so
    the default floor bounds that artifact near 1e-5.

    ``reference`` supplies the function differenced numerically when it is
    not ``f`` itself: a loss with stop-gradient targets is checked against
    the same loss with the targets frozen at ``x``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    xn = Node(x.copy(), requires_grad=True)
    out = f(xn)
    _scalar(out)
    backward(out)
    analytic = xn.grad
    if not np.all(np.isfinite(analytic)):
        raise GradCheckError("backward produced a non-finite gradient")
    numeric = numeric_grad(reference or f, x, h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
