"""Minimal reverse-mode automatic differentiation over float64 arrays.

A ``Tensor`` wraps a numpy array together with an optional gradient and the
local vector-Jacobian closures of the operation that produced it.  The op set
is exactly what the estimation network needs: elementwise arithmetic, matrix
products, reshapes/slices/concats, ReLU/GELU, row softmax, layer
normalization, and scalar reductions.  Graphs are built per forward pass and
freed afterwards; no graph compilation, no higher-order derivatives.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

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
]


class Tensor:
    """Node of the differentiation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None,
        validate: bool = True,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        # only graph leaves are validated; interior nodes inherit finiteness
        # and the training loop guards the loss value explicitly
        if validate and not np.all(np.isfinite(self.value)):
            raise ValueError("tensor values must be finite")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def parameter(value) -> Tensor:
    """Leaf tensor that accumulates a gradient."""
    return Tensor(value, requires_grad=True)


def constant(value) -> Tensor:
    """Leaf tensor treated as data."""
    return Tensor(value, requires_grad=False)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _node(value, parents, vjp) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, parents=parents, vjp=vjp, validate=False)
    return Tensor(value, validate=False)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value + b.value

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value - b.value

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value * b.value

    def vjp(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _node(out, (a, b), vjp)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _node(-a.value, (a,), lambda g: (-g,))


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)
    return _node(a.value * s, (a,), lambda g: (g * s,))


def matmul(a, b) -> Tensor:
    """Batched matrix product; operands must be at least 2-D."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if a.value.shape[-1] != b.value.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.value @ b.value

    def vjp(g):
        ga = _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape)
        return ga, gb

    return _node(out, (a, b), vjp)


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = _as_tensor(a)
    out = np.swapaxes(a.value, -1, -2)
    return _node(out, (a,), lambda g: (np.swapaxes(g, -1, -2),))


def permute(a, axes: tuple[int, ...]) -> Tensor:
    """Reorder all axes."""
    a = _as_tensor(a)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(a.value, axes)
    return _node(out, (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.value.shape
    return _node(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def slice_axis(a, start: int, stop: int, axis: int = -2) -> Tensor:
    """Contiguous slice along one axis."""
    a = _as_tensor(a)
    index = [slice(None)] * a.value.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = a.value[index]

    def vjp(g):
        full = np.zeros_like(a.value)
        full[index] = g
        return (full,)

    return _node(out, (a,), vjp)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.value for t in ts], axis=axis)
    sizes = [t.value.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tuple(ts), vjp)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.value > 0.0
    return _node(a.value * mask, (a,), lambda g: (g * mask,))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a) -> Tensor:
    """Exact GELU x * Phi(x) with the Gaussian CDF."""
    a = _as_tensor(a)
    x = a.value
    phi = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * phi

    def vjp(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return (g * (phi + x * pdf),)

    return _node(out, (a,), vjp)


def softmax(a) -> Tensor:
    """Softmax over the last axis; rows sum to one."""
    a = _as_tensor(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = np.sum(g * y, axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _node(y, (a,), vjp)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Per-row standardization over the last axis, then affine gamma, beta."""
    if eps <= 0:
        raise ValueError("layer norm stabilizer must be positive")
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if gamma.value.shape[-1] != x.value.shape[-1] or beta.value.shape[-1] != x.value.shape[-1]:
        raise ValueError("gain/bias width must match the normalized axis")
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.value * xhat + beta.value

    def vjp(g):
        d = x.value.shape[-1]
        gxhat = g * gamma.value
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * np.mean(gxhat * xhat, axis=-1, keepdims=True)
        )
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gbeta = _unbroadcast(g, beta.shape)
        return gx, ggamma, gbeta

    return _node(out, (x, gamma, beta), vjp)


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    shape = a.value.shape
    return _node(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(a) -> Tensor:
    a = _as_tensor(a)
    n = a.value.size
    shape = a.value.shape
    return _node(
        a.value.mean(), (a,), lambda g: (np.broadcast_to(g / n, shape).copy(),)
    )


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and (p.requires_grad or p._parents):
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable tensor with ``requires_grad``.

    Gradients are reset on each call, so repeated backward passes do not
    accumulate across calls.  A parameter the loss does not depend on keeps
    ``grad is None``; callers treat that as zero.
    """
    if loss.value.ndim != 0:
        raise ValueError("backward expects a scalar loss")
    order = _toposort(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._vjp is None or node.grad is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node._parents, grads):
            if parent.requires_grad:
                if parent.grad is None:
                    parent.grad = g
                else:
                    # new allocation: the stored grad may alias a child's
                    # buffer through view-returning backward rules
                    parent.grad = parent.grad + g
