"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced so that
backward() can push gradients to every parameter that contributed to a
scalar loss. The graph is built eagerly and freed after use; nodes whose
inputs do not require gradients are constant-folded and record nothing.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "concat",
    "linear",
    "matmul",
    "stopgrad",
    "softmax",
    "log_softmax",
    "symlog",
    "symexp",
]


class Tensor:
    """An ndarray plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad: bool = False, parents=()):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._bwd = None

    # -- introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def _accum(self, g):
        self.grad = g if self.grad is None else self.grad + g

    # -- operators ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -_np_scalar(other))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / _np_scalar(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other, dtype=self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    # -- fluent helpers -----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def detach(self) -> "Tensor":
        return stopgrad(self)


def _np_scalar(x):
    return x if isinstance(x, np.ndarray) else np.float64(x)


def as_tensor(x, dtype=None) -> Tensor:
    """Wrap arrays or scalars as a constant Tensor."""
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to the given (broadcast-source) shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _node(data, parents) -> Tensor:
    live = tuple(p for p in parents if p.requires_grad)
    if not live:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=live)


# -- arithmetic -------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        out = _node(a.data + np.asarray(b, dtype=a.dtype), (a,))
        if out.requires_grad:
            out._bwd = lambda g: a._accum(_unbroadcast(g, a.shape))
        return out
    out = _node(a.data + b.data, (a, b))
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.shape))
        out._bwd = bwd
    return out


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        bv = np.asarray(b, dtype=a.dtype)
        out = _node(a.data * bv, (a,))
        if out.requires_grad:
            out._bwd = lambda g: a._accum(_unbroadcast(g * bv, a.shape))
        return out
    out = _node(a.data * b.data, (a, b))
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.shape))
        out._bwd = bwd
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    out = _node(a.data / b.data, (a, b))
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))
        out._bwd = bwd
    return out


def neg(a: Tensor) -> Tensor:
    out = _node(-a.data, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(-g)
    return out


def power(a: Tensor, k: float) -> Tensor:
    kv = float(k)
    out = _node(a.data ** kv, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * kv * a.data ** (kv - 1.0))
    return out


# -- elementwise nonlinearities --------------------------------------


def relu(a: Tensor) -> Tensor:
    out = _node(np.maximum(a.data, 0), (a,))
    if out.requires_grad:
        mask = a.data > 0
        out._bwd = lambda g: a._accum(g * mask)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = _node(s, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * s * (1.0 - s))
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = _node(t, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * (1.0 - t * t))
    return out


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    out = _node(e, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * e)
    return out


def log(a: Tensor) -> Tensor:
    out = _node(np.log(a.data), (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g / a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    r = np.sqrt(a.data)
    out = _node(r, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * (0.5 / r))
    return out


def square(a: Tensor) -> Tensor:
    out = _node(a.data * a.data, (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * (2.0 * a.data))
    return out


def symlog(a: Tensor) -> Tensor:
    """sign(x) * log(1 + |x|), a scale-compressing bijection."""
    out = _node(np.sign(a.data) * np.log1p(np.abs(a.data)), (a,))
    if out.requires_grad:
        d = 1.0 / (1.0 + np.abs(a.data))
        out._bwd = lambda g: a._accum(g * d)
    return out


def symexp(a: Tensor) -> Tensor:
    """Inverse of symlog: sign(x) * (exp(|x|) - 1)."""
    e = np.exp(np.abs(a.data))
    out = _node(np.sign(a.data) * (e - 1.0), (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g * e)
    return out


# -- reductions -------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = _node(a.data.sum(axis=axis, keepdims=keepdims), (a,))
    if out.requires_grad:
        def bwd(g):
            if axis is None:
                a._accum(np.broadcast_to(g.reshape((1,) * a.ndim), a.shape))
                return
            if not keepdims:
                axes = axis if isinstance(axis, tuple) else (axis,)
                axes = tuple(ax % a.ndim for ax in axes)
                shape = tuple(1 if i in axes else s for i, s in enumerate(a.shape))
                g = g.reshape(shape)
            a._accum(np.broadcast_to(g, a.shape))
        out._bwd = bwd
    return out


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= a.shape[ax % a.ndim]
    return mul(tsum(a, axis, keepdims), 1.0 / n)


# -- shape ------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = _node(a.data.reshape(shape), (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(g.reshape(a.shape))
    return out


def take(a: Tensor, key) -> Tensor:
    """Basic slicing/indexing; gradient scatters back into a zero array."""
    out = _node(a.data[key], (a,))
    if out.requires_grad:
        def bwd(g):
            full = np.zeros_like(a.data)
            full[key] = g
            a._accum(full)
        out._bwd = bwd
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out = _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        def bwd(g):
            start = 0
            for t, s in zip(tensors, sizes):
                if t.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(start, start + s)
                    t._accum(g[tuple(idx)])
                start += s
        out._bwd = bwd
    return out


def expand(a: Tensor, shape) -> Tensor:
    out = _node(np.broadcast_to(a.data, shape), (a,))
    if out.requires_grad:
        out._bwd = lambda g: a._accum(_unbroadcast(g, a.shape))
    return out


def stopgrad(a: Tensor) -> Tensor:
    return Tensor(a.data)


# -- linear algebra ---------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    out = _node(a.data @ b.data, (a, b))
    if out.requires_grad:
        def bwd(g):
            if a.requires_grad:
                a._accum(g @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ g)
        out._bwd = bwd
    return out


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused x @ w + b for 2-D x; one graph node instead of two."""
    if x.ndim != 2:
        raise ValueError(f"linear expects 2-D input, got {x.shape}")
    out = _node(x.data @ w.data + b.data, (x, w, b))
    if out.requires_grad:
        def bwd(g):
            if x.requires_grad:
                x._accum(g @ w.data.T)
            if w.requires_grad:
                w._accum(x.data.T @ g)
            if b.requires_grad:
                b._accum(g.sum(axis=0))
        out._bwd = bwd
    return out


# -- softmax family ---------------------------------------------------


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stabilized."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    out = _node(p, (a,))
    if out.requires_grad:
        def bwd(g):
            a._accum(p * (g - (g * p).sum(axis=-1, keepdims=True)))
        out._bwd = bwd
    return out


def log_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    ls = z - lse
    out = _node(ls, (a,))
    if out.requires_grad:
        p = np.exp(ls)
        def bwd(g):
            a._accum(g - p * g.sum(axis=-1, keepdims=True))
        out._bwd = bwd
    return out


# -- backward pass ----------------------------------------------------


def _toposort(root: Tensor):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        nid = id(node)
        if nid in visited:
            continue
        visited.add(nid)
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=None) -> None:
    """Populate .grad on every tensor reachable from loss.

    loss must be a scalar. When params is given, any listed tensor the
    loss does not depend on gets an explicit zero gradient so optimizers
    can treat the parameter list uniformly.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    for t in order:
        t.grad = None
    loss.grad = np.ones_like(loss.data)
    for t in reversed(order):
        if t._bwd is not None and t.grad is not None:
            t._bwd(t.grad)
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
