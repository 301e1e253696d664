"""Adam with global-norm gradient clipping."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["OptimState", "adam_step", "global_grad_norm"]


class NonFiniteGradient(FloatingPointError):
    """Raised when a gradient contains NaN or inf before the update."""


class OptimState:
    """Adam accumulators plus hyperparameters for one parameter list."""

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip: float = 100.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip = clip
        self.step = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def global_grad_norm(grads) -> float:
    total = 0.0
    for g in grads:
        total += float(np.square(g, dtype=np.float64).sum())
    return float(np.sqrt(total))


def adam_step(params: list[Tensor], state: OptimState, grads=None) -> float:
    """Apply one Adam update in place; returns the pre-clip gradient norm.

    grads defaults to each parameter's .grad slot (zeros when absent).
    Non-finite gradients raise before any parameter is touched.
    """
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ValueError("params and grads length mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("non-finite gradient encountered")
    norm = global_grad_norm(grads)
    scale = 1.0
    if state.clip is not None and np.isfinite(state.clip) and norm > state.clip:
        scale = state.clip / (norm + 1e-12)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = g * scale if scale != 1.0 else g
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        p.data -= (state.lr * update).astype(p.data.dtype, copy=False)
    return norm
