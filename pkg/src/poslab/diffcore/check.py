"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward

__all__ = ["grad_check"]


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    f is a zero-argument closure over params returning a scalar Tensor;
    it must be deterministic across calls (fix any rng inside). Error per
    entry is |analytic - numeric| / max(1, |analytic|); the max over all
    entries of all params is returned. Use float64 parameters: eps^2
    truncation is below 1e-9 but float32 round-off is not.
    """
    loss = f()
    backward(loss, params=params)
    analytic = [p.grad.copy() for p in params]
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]))
            if err > worst:
                worst = err
    return worst
