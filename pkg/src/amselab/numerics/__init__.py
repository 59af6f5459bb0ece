"""Real/complex dense numerics: autodiff, attention primitives, losses, Adam."""

from .autodiff import (
    Tensor,
    add,
    backward,
    concat,
    constant,
    gelu,
    layer_norm,
    matmul,
    mean_all,
    mul,
    neg,
    parameter,
    permute,
    relu,
    reshape,
    scale,
    slice_axis,
    softmax,
    sub,
    sum_all,
    transpose,
)
from .attention import (
    ACTIVATIONS,
    feed_forward,
    multi_head_attention,
    scaled_dot_product_attention,
)
from .losses import (
    huber_loss,
    huber_objective,
    huber_value_grad,
    mse_loss,
    mse_objective,
)
from .optim import AdamState, adam_step

__all__ = [
    "Tensor",
    "parameter",
    "constant",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "matmul",
    "transpose",
    "permute",
    "reshape",
    "slice_axis",
    "concat",
    "relu",
    "gelu",
    "softmax",
    "layer_norm",
    "mean_all",
    "sum_all",
    "backward",
    "scaled_dot_product_attention",
    "multi_head_attention",
    "feed_forward",
    "ACTIVATIONS",
    "huber_loss",
    "mse_loss",
    "huber_objective",
    "mse_objective",
    "huber_value_grad",
    "AdamState",
    "adam_step",
]
