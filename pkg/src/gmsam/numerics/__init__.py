"""Tensor algebra, reverse-mode differentiation and training primitives."""
from gmsam.numerics.gradcheck import gradient_check, numeric_gradient
from gmsam.numerics.optim import Adam, OptimizerState, optimizer_step
from gmsam.numerics.tensor import (
    PRIMITIVES,
    ComputationRecord,
    FlopCounter,
    Function,
    Tensor,
    add,
    concat,
    conv2d,
    count_flops,
    div,
    gelu,
    get_default_dtype,
    huber_loss,
    is_grad_enabled,
    layer_norm,
    matmul,
    mean,
    mul,
    narrow,
    neg,
    no_grad,
    permute,
    precision,
    record,
    relu,
    reshape,
    set_default_dtype,
    softmax,
    sub,
    tensor,
    tsum,
)

__all__ = [
    "PRIMITIVES", "Adam", "ComputationRecord", "FlopCounter", "Function", "OptimizerState", "Tensor",
    "add", "concat", "conv2d", "count_flops", "div", "gelu", "get_default_dtype", "gradient_check",
    "huber_loss", "is_grad_enabled", "layer_norm", "matmul", "mean", "mul", "narrow", "neg", "no_grad",
    "numeric_gradient", "optimizer_step", "permute", "precision", "record", "relu", "reshape",
    "set_default_dtype", "softmax", "sub", "tensor", "tsum",
]
