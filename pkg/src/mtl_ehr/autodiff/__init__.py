"""Reverse-mode automatic differentiation over numpy arrays."""
from .losses import bce_with_logits, cross_entropy, loss, mse
from .tensor import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    dropout,
    elementwise,
    exp,
    gelu,
    getitem,
    layer_norm,
    log,
    log_softmax,
    masked_fill,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack,
    sub,
    tanh,
    tmax,
    transpose,
    tsum,
)

__all__ = [
    "Parameter", "Tensor", "add", "as_tensor", "backward", "bce_with_logits",
    "concat", "cross_entropy", "dropout", "elementwise", "exp", "gelu", "getitem",
    "layer_norm", "log", "log_softmax", "loss", "masked_fill", "matmul", "mean",
    "mse", "mul", "no_grad", "relu", "reshape", "scale", "sigmoid", "softmax",
    "stack", "sub", "tanh", "tmax", "transpose", "tsum",
]
