"""Training objectives: mean-squared error and the Huber loss.

Both losses average over every real-valued residual component (a complex
residual counts as two), so that a mini-batch mean over frames equals the
global mean and Huber equals MSE/2 per element whenever all residuals stay
inside the quadratic region.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, _as_tensor, _node

__all__ = [
    "huber_value_grad",
    "huber_loss",
    "mse_loss",
    "huber_objective",
    "mse_objective",
]


def _real_components(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.concatenate([a.real.ravel(), a.imag.ravel()])
    return a.ravel().astype(np.float64)


def huber_value_grad(
    a: np.ndarray, delta: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise Huber value and derivative (no averaging)."""
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise ValueError("Huber threshold must be positive")
    absa = np.abs(a)
    quad = absa <= delta
    value = np.where(quad, 0.5 * a * a, delta * (absa - 0.5 * delta))
    grad = np.where(quad, a, delta * np.sign(a))
    return value, grad


def huber_loss(residuals: np.ndarray, delta: float) -> tuple[float, np.ndarray]:
    """Mean Huber loss over all real components plus its gradient.

    Complex residuals are split into real and imaginary parts before the
    per-element loss is applied; the returned gradient has the shape and
    dtype of ``residuals``.
    """
    r = np.asarray(residuals)
    comps = _real_components(r)
    value, grad_comps = huber_value_grad(comps, delta)
    loss = float(value.mean())
    n = comps.size
    if np.iscomplexobj(r):
        half = r.size
        grad = (grad_comps[:half] + 1j * grad_comps[half:]).reshape(r.shape) / n
    else:
        grad = grad_comps.reshape(r.shape) / n
    return loss, grad


def mse_loss(estimate: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of squared residual components plus the gradient 2(est - target)/n.

    For complex inputs the mean runs over the 2 * size real components, so a
    unit complex residual contributes 1 to the squared Frobenius norm and 1/2
    to the per-component mean.
    """
    est = np.asarray(estimate)
    tgt = np.asarray(target)
    if est.shape != tgt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tgt.shape}")
    r = est - tgt
    comps = _real_components(r)
    loss = float(np.mean(comps * comps))
    return loss, 2.0 * r / comps.size


def huber_objective(residual: Tensor, delta: float | np.ndarray) -> Tensor:
    """Graph node: mean Huber loss of a real residual tensor.

    ``delta`` may be a scalar or broadcastable array (per-sample thresholds).
    """
    residual = _as_tensor(residual)
    a = residual.value
    delta_b = np.broadcast_to(np.asarray(delta, dtype=np.float64), a.shape)
    value, grad = huber_value_grad(a, delta_b)
    n = a.size

    def vjp(g):
        return (g * grad / n,)

    return _node(np.asarray(value.mean()), (residual,), vjp)


def mse_objective(residual: Tensor) -> Tensor:
    """Graph node: mean squared value of a real residual tensor."""
    residual = _as_tensor(residual)
    a = residual.value
    n = a.size

    def vjp(g):
        return (g * 2.0 * a / n,)

    return _node(np.asarray(np.mean(a * a)), (residual,), vjp)
