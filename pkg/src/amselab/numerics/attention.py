"""Attention-layer building blocks on top of the autodiff engine.

All functions accept 2-D (rows x width) or batched 3-D inputs and return
tensors of matching leading shape.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import (
    Tensor,
    _as_tensor,
    add,
    concat,
    gelu,
    matmul,
    relu,
    scale,
    softmax,
    transpose,
)

__all__ = [
    "scaled_dot_product_attention",
    "multi_head_attention",
    "feed_forward",
    "ACTIVATIONS",
]

ACTIVATIONS = {"relu": relu, "gelu": gelu}


def scaled_dot_product_attention(q, k, v) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V."""
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    d_k = q.value.shape[-1]
    if d_k < 1:
        raise ValueError("query width d_k must be positive")
    if k.value.shape[-1] != d_k:
        raise ValueError(f"key width {k.value.shape[-1]} != query width {d_k}")
    if k.value.shape[-2] != v.value.shape[-2]:
        raise ValueError("key and value row counts must match")
    scores = scale(matmul(q, transpose(k)), 1.0 / np.sqrt(d_k))
    return matmul(softmax(scores), v)


def multi_head_attention(
    x, head_params: Sequence[tuple], w_o, heads: int | None = None
) -> Tensor:
    """Self-attention: concat of per-head attentions merged by W_O.

    ``head_params`` is a sequence of (W_Q, W_K, W_V) triples, one per head,
    each projecting the model width d to d/h.
    """
    x = _as_tensor(x)
    if heads is None:
        heads = len(head_params)
    if heads != len(head_params):
        raise ValueError(f"got {len(head_params)} head parameter triples for {heads} heads")
    d = x.value.shape[-1]
    if d % heads != 0:
        raise ValueError(f"model width {d} not divisible by {heads} heads")
    outs = []
    for w_q, w_k, w_v in head_params:
        q = matmul(x, w_q)
        k = matmul(x, w_k)
        v = matmul(x, w_v)
        outs.append(scaled_dot_product_attention(q, k, v))
    merged = outs[0] if len(outs) == 1 else concat(outs, axis=-1)
    return matmul(merged, w_o)


def feed_forward(x, w1, b1, w2, b2, activation: str = "relu") -> Tensor:
    """Position-wise two-layer network: act(x W1 + b1) W2 + b2."""
    try:
        act = ACTIVATIONS[activation]
    except KeyError:
        raise ValueError(f"unknown activation {activation!r}") from None
    hidden = act(add(matmul(x, w1), b1))
    return add(matmul(hidden, w2), b2)
