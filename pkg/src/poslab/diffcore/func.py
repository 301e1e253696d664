"""Stochastic-latent and similarity primitives built on the tensor engine."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, exp, log_softmax, softmax, sqrt, stopgrad, square, tsum

__all__ = [
    "categorical_sample_st",
    "kl_balanced",
    "kl_categorical",
    "cosine_sim",
]

_COSINE_EPS = 1e-8


def _sample_onehot(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one-hot samples over the last axis via inverse-CDF."""
    classes = probs.shape[-1]
    flat = probs.reshape(-1, classes)
    cum = np.cumsum(flat, axis=-1)
    # guard against cumulative rounding leaving the last entry below 1
    cum[:, -1] = 1.0
    u = rng.random((flat.shape[0], 1), dtype=np.float64)
    idx = (u <= cum).argmax(axis=-1)
    onehot = np.zeros_like(flat)
    onehot[np.arange(flat.shape[0]), idx] = 1.0
    return onehot.reshape(probs.shape)


def categorical_sample_st(logits: Tensor, rng: np.random.Generator) -> Tensor:
    """Sample exact one-hot vectors with straight-through softmax gradients.

    The forward value is a bitwise one-hot array over the last axis; the
    backward rule is the jacobian of softmax(logits), so gradients flow
    as if the sample had been the class probabilities.
    """
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    onehot = _sample_onehot(p, rng).astype(logits.dtype)
    if not logits.requires_grad:
        return Tensor(onehot)
    out = Tensor(onehot, requires_grad=True, parents=(logits,))
    def bwd(g):
        logits._accum(p * (g - (g * p).sum(axis=-1, keepdims=True)))
    out._bwd = bwd
    return out


def kl_categorical(post_logits: Tensor, prior_logits: Tensor) -> Tensor:
    """KL(post || prior) per row, summed over the trailing (group, class) axes."""
    lp = log_softmax(post_logits)
    lq = log_softmax(prior_logits)
    per = exp(lp) * (lp - lq)
    return tsum(per, axis=(-2, -1))


def kl_balanced(post_logits: Tensor, prior_logits: Tensor,
                alpha: float = 0.8, free_nats: float = 1.0) -> Tensor:
    """Balanced KL between grouped categorical posteriors and priors.

    Inputs have shape (..., groups, classes). The scalar value is the KL
    summed over groups and averaged over leading dims. Below free_nats the
    result is the free_nats constant with no gradient; above it, gradients
    are split alpha onto the prior (posterior stopped) and 1 - alpha onto
    the posterior (prior stopped).
    """
    value = kl_categorical(post_logits, prior_logits).mean()
    if value.item() < free_nats:
        return Tensor(np.asarray(free_nats, dtype=post_logits.dtype))
    lhs = kl_categorical(stopgrad(post_logits), prior_logits).mean()
    rhs = kl_categorical(post_logits, stopgrad(prior_logits)).mean()
    return lhs * alpha + rhs * (1.0 - alpha)


def cosine_sim(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity over the last axis, epsilon-guarded at zero norm.

    1-D inputs give a scalar; batched inputs give one value per row.
    """
    num = tsum(a * b, axis=-1)
    na = sqrt(tsum(square(a), axis=-1) + _COSINE_EPS)
    nb = sqrt(tsum(square(b), axis=-1) + _COSINE_EPS)
    return num / (na * nb)
