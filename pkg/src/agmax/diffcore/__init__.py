"""Small dense reverse-mode autodiff engine on top of numpy."""

from .gradcheck import grad_check, numeric_grad
from .node import DEFAULT_DTYPE, Node, as_node, backward, check_finite, tensor
from .ops import (
    LOG_FLOOR,
    add,
    bias_add,
    concat,
    conv2d,
    div,
    exp,
    getitem,
    log,
    matmul,
    max_pool2d,
    mean,
    mul,
    neg,
    one_hot,
    power,
    relu,
    reshape,
    softmax,
    stop_gradient,
    sub,
    sum,
    transpose,
)
from .params import ParameterStore

__all__ = [
    "DEFAULT_DTYPE",
    "LOG_FLOOR",
    "Node",
    "ParameterStore",
    "add",
    "as_node",
    "backward",
    "bias_add",
    "check_finite",
    "concat",
    "conv2d",
    "div",
    "exp",
    "getitem",
    "grad_check",
    "log",
    "matmul",
    "max_pool2d",
    "mean",
    "mul",
    "neg",
    "numeric_grad",
    "one_hot",
    "power",
    "relu",
    "reshape",
    "softmax",
    "stop_gradient",
    "sub",
    "sum",
    "tensor",
    "transpose",
]
