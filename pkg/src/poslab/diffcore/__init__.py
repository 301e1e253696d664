"""Minimal autodiff substrate: tensors, layers, optimizer, checkpoints."""

from .tensor import (
    Tensor,
    as_tensor,
    backward,
    concat,
    expand,
    exp,
    linear,
    log,
    log_softmax,
    matmul,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    square,
    stopgrad,
    symexp,
    symlog,
    tanh,
    tmean,
    tsum,
)
from .func import categorical_sample_st, cosine_sim, kl_balanced, kl_categorical
from .nn import Dense, DenseStack, Module, RecurrentCell
from .optim import NonFiniteGradient, OptimState, adam_step, global_grad_norm
from .check import grad_check
from .io import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "as_tensor", "backward", "concat", "expand", "exp", "linear",
    "log", "log_softmax", "matmul", "relu", "reshape", "sigmoid", "softmax",
    "sqrt", "square", "stopgrad", "symexp", "symlog", "tanh", "tmean", "tsum",
    "categorical_sample_st", "cosine_sim", "kl_balanced", "kl_categorical",
    "Dense", "DenseStack", "Module", "RecurrentCell",
    "NonFiniteGradient", "OptimState", "adam_step", "global_grad_norm",
    "grad_check", "save_checkpoint", "load_checkpoint",
]
