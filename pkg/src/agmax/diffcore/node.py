"""Computation graph nodes and the reverse-mode sweep."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import NumericError, ShapeError

DEFAULT_DTYPE = np.float64

# A backward rule maps the upstream gradient to one gradient per parent
# (None for parents that do not need one).
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Node:
    """A value in a define-by-run graph.

    ``value`` is never mutated by ops. ``grad`` reads as zeros until a
    backward sweep (or an optimizer) fills it.
    """

    __slots__ = ("value", "_grad", "parents", "backward_fn", "requires_grad", "op", "__weakref__")

    # let numpy defer to Node's reflected operators
    __array_priority__ = 1000

    def __init__(
        self,
        value,
        parents: Sequence["Node"] = (),
        backward_fn: Optional[BackwardFn] = None,
        requires_grad: bool = False,
        op: str = "leaf",
        dtype=None,
    ):
        arr = np.asarray(value, dtype=dtype if dtype is not None else None)
        if arr.dtype.kind != "f":
            arr = arr.astype(dtype or DEFAULT_DTYPE)
        self.value = arr
        self._grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = bool(requires_grad)
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g):
        if g is None:
            self._grad = None
            return
        g = np.asarray(g, dtype=self.value.dtype)
        if g.shape != self.value.shape:
            raise ShapeError("grad", self.value.shape, g.shape)
        self._grad = g

    def zero_grad(self):
        self._grad = None

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.value)))

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.value

    def detach(self) -> "Node":
        return Node(self.value, op="detach")

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, k):
        from . import ops
        return ops.power(self, k)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)


def as_node(x, dtype=None) -> Node:
    if isinstance(x, Node):
        return x
    return Node(np.asarray(x, dtype=dtype or DEFAULT_DTYPE), op="const")


def tensor(data, requires_grad=False, dtype=None) -> Node:
    """Create a leaf node holding a copy of ``data``."""
    return Node(np.array(data, dtype=dtype or DEFAULT_DTYPE), requires_grad=requires_grad)


def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node.parents):
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Populate ``grad`` on every ``requires_grad`` node reachable from ``root``.

    Leaf gradients accumulate into whatever they already hold, so callers
    zero them between steps. Intermediate gradients are overwritten.
    """
    if root.value.size != 1:
        raise ShapeError("backward", root.shape, (), detail="root must be scalar")
    if not root.requires_grad:
        return
    order = _topo_order(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node.parents:
            node._grad = g if node._grad is None else node._grad + g
            continue
        node._grad = g
        if node.backward_fn is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def check_finite(node: Node, what: str = "value") -> None:
    if not node.is_finite():
        raise NumericError(f"non-finite {what} in {node.op} output")
