"""Reverse-mode automatic differentiation over dense numpy tensors."""

from .gradcheck import analytic_gradient, gradcheck, numeric_gradient
from .ops import (
    concat_channels,
    conv2d,
    conv_output_size,
    instance_norm,
    upsample_conv,
    upsample_nearest2x,
)
from .tensor import (
    Tape,
    Tensor,
    active_tape,
    add,
    atanh,
    backward,
    l1_loss,
    leaky_relu,
    mse_loss,
    mul,
    neg,
    relu,
    sub,
    tanh,
    tensor_mean,
    tensor_sum,
)

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "analytic_gradient",
    "atanh",
    "backward",
    "concat_channels",
    "conv2d",
    "conv_output_size",
    "gradcheck",
    "instance_norm",
    "l1_loss",
    "leaky_relu",
    "mse_loss",
    "mul",
    "neg",
    "numeric_gradient",
    "relu",
    "sub",
    "tanh",
    "tensor_mean",
    "tensor_sum",
    "upsample_conv",
    "upsample_nearest2x",
]
