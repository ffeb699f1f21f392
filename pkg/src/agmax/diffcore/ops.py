"""Differentiable ops over :class:`Node`.

Binary elementwise ops accept operands of equal shape, or a scalar (python
number or 0-d node) against a tensor. No other broadcasting is done;
``bias_add`` covers the per-feature bias case explicitly.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .node import Node, as_node

LOG_FLOOR = 1e-12


def _wrap(value, parents, backward_fn, op):
    requires = any(p.requires_grad for p in parents)
    return Node(value, parents, backward_fn if requires else None, requires, op)


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) or (
        isinstance(x, Node) and x.value.ndim == 0
    )


def _binary_operands(op, a, b):
    """Resolve operands to nodes and classify the scalar side, if any."""
    a_scalar = _is_scalar(a)
    b_scalar = _is_scalar(b)
    if not isinstance(a, Node) and not isinstance(b, Node):
        raise TypeError(f"{op}: at least one operand must be a Node")
    dtype = (a if isinstance(a, Node) else b).dtype
    a = as_node(a, dtype)
    b = as_node(b, dtype)
    if not (a_scalar or b_scalar) and a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)
    return a, b


def _reduce_to(g, node):
    """Sum a gradient down to a scalar operand's shape."""
    if node.value.ndim == 0 and g.ndim != 0:
        return np.asarray(g.sum(), dtype=g.dtype)
    return g


def add(a, b) -> Node:
    a, b = _binary_operands("add", a, b)
    out = a.value + b.value

    def bw(g):
        return _reduce_to(g, a), _reduce_to(g, b)

    return _wrap(out, (a, b), bw, "add")


def sub(a, b) -> Node:
    a, b = _binary_operands("sub", a, b)
    out = a.value - b.value

    def bw(g):
        return _reduce_to(g, a), _reduce_to(-g, b)

    return _wrap(out, (a, b), bw, "sub")


def mul(a, b) -> Node:
    a, b = _binary_operands("mul", a, b)
    av, bv = a.value, b.value

    def bw(g):
        return _reduce_to(g * bv, a), _reduce_to(g * av, b)

    return _wrap(av * bv, (a, b), bw, "mul")


def div(a, b) -> Node:
    a, b = _binary_operands("div", a, b)
    av, bv = a.value, b.value
    out = av / bv

    def bw(g):
        return _reduce_to(g / bv, a), _reduce_to(-g * av / (bv * bv), b)

    return _wrap(out, (a, b), bw, "div")


def neg(a: Node) -> Node:
    return _wrap(-a.value, (a,), lambda g: (-g,), "neg")


def power(a: Node, k: float) -> Node:
    av = a.value

    def bw(g):
        return (g * k * av ** (k - 1),)

    return _wrap(av**k, (a,), bw, "pow")


def matmul(a: Node, b: Node) -> Node:
    a, b = as_node(a), as_node(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value

    def bw(g):
        return g @ bv.T, av.T @ g

    return _wrap(av @ bv, (a, b), bw, "matmul")


def bias_add(x: Node, b: Node, axis: int = -1) -> Node:
    """x + b where ``b`` is a vector along ``axis`` of ``x``."""
    axis = axis % x.ndim
    if b.ndim != 1 or b.shape[0] != x.shape[axis]:
        raise ShapeError("bias_add", x.shape, b.shape)
    shape = [1] * x.ndim
    shape[axis] = -1
    others = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        return g, g.sum(axis=others)

    return _wrap(x.value + b.value.reshape(shape), (x, b), bw, "bias_add")


def relu(x: Node) -> Node:
    mask = x.value > 0
    return _wrap(np.where(mask, x.value, 0.0).astype(x.dtype), (x,), lambda g: (g * mask,), "relu")


def exp(x: Node) -> Node:
    out = np.exp(x.value)
    return _wrap(out, (x,), lambda g: (g * out,), "exp")


def log(x: Node, floor: float = LOG_FLOOR) -> Node:
    """Natural log of ``max(x, floor)``; zero gradient below the floor."""
    xv = x.value
    clamped = np.maximum(xv, floor)
    live = xv > floor

    def bw(g):
        return (np.where(live, g / clamped, 0.0).astype(g.dtype),)

    return _wrap(np.log(clamped), (x,), bw, "log")


def softmax(x: Node, axis: int = -1) -> Node:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _wrap(out, (x,), bw, "softmax")


def sum(x: Node, axis=None, keepdims: bool = False) -> Node:  # noqa: A001
    shape = x.shape
    out = np.asarray(x.value.sum(axis=axis, keepdims=keepdims))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _wrap(out, (x,), bw, "sum")


def mean(x: Node, axis=None, keepdims: bool = False) -> Node:
    if axis is None:
        count = x.value.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Node, shape) -> Node:
    old = x.shape
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", old, shape) from None
    return _wrap(out, (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Node, axes: Optional[Sequence[int]] = None) -> Node:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError("transpose", x.shape, axes)
    inverse = tuple(np.argsort(axes))
    return _wrap(x.value.transpose(axes), (x,), lambda g: (g.transpose(inverse),), "transpose")


def concat(nodes: Sequence[Node], axis: int = 0) -> Node:
    nodes = [as_node(n) for n in nodes]
    ref = nodes[0].shape
    axis = axis % len(ref)
    for n in nodes[1:]:
        if len(n.shape) != len(ref) or any(
            n.shape[i] != ref[i] for i in range(len(ref)) if i != axis
        ):
            raise ShapeError("concat", ref, n.shape)
    sizes = [n.shape[axis] for n in nodes]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _wrap(np.concatenate([n.value for n in nodes], axis=axis), nodes, bw, "concat")


def getitem(x: Node, index) -> Node:
    shape = x.shape
    out = x.value[index]

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        np.add.at(full, index, g)
        return (full,)

    return _wrap(np.array(out), (x,), bw, "getitem")


def stop_gradient(x: Node) -> Node:
    return Node(x.value, op="stop_gradient")


def one_hot(labels, num_classes: int, dtype=np.float64) -> Node:
    """Constant n×C one-hot encoding of integer labels."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError("one_hot", labels.shape, (-1,))
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"one_hot: labels must lie in [0, {num_classes})")
    out = np.zeros((labels.size, num_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1.0
    return Node(out, op="one_hot")


def conv2d(x: Node, w: Node, b: Optional[Node] = None, padding: int = 0) -> Node:
    """Stride-1 cross-correlation, NCHW input, OIkk weights, zero padding."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError("conv2d", x.shape, w.shape)
    if b is not None and (b.ndim != 1 or b.shape[0] != w.shape[0]):
        raise ShapeError("conv2d", w.shape, b.shape, detail="bias")
    n, _, h, wd = x.shape
    kh, kw = w.shape[2:]
    p = int(padding)
    if h + 2 * p < kh or wd + 2 * p < kw:
        raise ShapeError("conv2d", x.shape, w.shape, detail="kernel larger than padded input")
    xp = np.pad(x.value, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.value
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    wv = w.value
    out = np.tensordot(win, wv, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b.value.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)
    ho, wo = out.shape[2:]

    def bw(g):
        dw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        cols = np.tensordot(g, wv, axes=([1], [0]))  # n, ho, wo, ci, kh, kw
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + ho, j : j + wo] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        dx = dxp[:, :, p : p + h, p : p + wd] if p else dxp
        grads = [dx, dw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    parents = (x, w) if b is None else (x, w, b)
    return _wrap(out, parents, bw, "conv2d")


def max_pool2d(x: Node, size: int = 2) -> Node:
    """Non-overlapping ``size``×``size`` max pooling; trailing rows/cols that
    do not fill a window are dropped. The gradient goes to the first maximum
    in row-major window order."""
    if x.ndim != 4:
        raise ShapeError("max_pool2d", x.shape, (size, size))
    n, c, h, w = x.shape
    ho, wo = h // size, w // size
    if ho == 0 or wo == 0:
        raise ShapeError("max_pool2d", x.shape, (size, size), detail="window larger than input")
    xc = x.value[:, :, : ho * size, : wo * size]
    blocks = xc.reshape(n, c, ho, size, wo, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        gb = np.zeros_like(blocks)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gx = np.zeros_like(x.value)
        gx[:, :, : ho * size, : wo * size] = (
            gb.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * size, wo * size)
        )
        return (gx,)

    return _wrap(out, (x,), bw, "max_pool2d")
