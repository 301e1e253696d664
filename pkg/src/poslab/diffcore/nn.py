"""Small neural-network building blocks: dense stacks and a gated recurrent cell."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, concat, linear, matmul, relu, sigmoid, tanh

__all__ = ["Module", "Dense", "DenseStack", "RecurrentCell"]

_ACTIVATIONS = {
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    None: lambda t: t,
    "none": lambda t: t,
}


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


class Module:
    """Parameter container with stable hierarchical names for checkpoints."""

    def __init__(self):
        self._own: list[tuple[str, Tensor]] = []
        self._children: list[tuple[str, "Module"]] = []

    def _param(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True)
        self._own.append((name, t))
        return t

    def _child(self, name: str, module: "Module") -> "Module":
        self._children.append((name, module))
        return module

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = list(self._own)
        for cname, child in self._children:
            out.extend((f"{cname}/{pname}", p) for pname, p in child.named_params())
        return out

    def params(self) -> list[Tensor]:
        return [p for _, p in self.named_params()]

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_params()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.named_params():
            if name not in arrays:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            src = arrays[name]
            if src.shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {src.shape} vs {p.data.shape}")
            p.data = src.astype(p.data.dtype, copy=True)


class Dense(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int,
                 activation=None, dtype=np.float32):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = _ACTIVATIONS[activation]
        self.w = self._param("w", glorot_uniform(rng, in_dim, out_dim, dtype))
        self.b = self._param("b", np.zeros(out_dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return self.activation(linear(x, self.w, self.b))


class DenseStack(Module):
    """MLP over 2-D batches: hidden activations between every layer pair.

    sizes lists every layer width including input and output, e.g.
    (6, 64, 64, 2) builds two hidden layers of 64 units.
    """

    def __init__(self, rng: np.random.Generator, sizes, *, hidden_activation="relu",
                 out_activation=None, dtype=np.float32):
        super().__init__()
        sizes = tuple(sizes)
        if len(sizes) < 2:
            raise ValueError("DenseStack needs at least input and output sizes")
        self.sizes = sizes
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            act = hidden_activation if i < len(sizes) - 2 else out_activation
            layer = Dense(rng, a, b, activation=act, dtype=dtype)
            self._child(str(i), layer)
            self.layers.append(layer)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


class RecurrentCell(Module):
    """Gated recurrent cell whose hidden state stays inside (-1, 1).

    The update is the standard GRU: reset and update gates from the
    concatenated (input, hidden), candidate through tanh, and the new
    hidden a convex blend of the old hidden and the candidate. Starting
    from zeros the state can never leave the open unit interval.
    """

    def __init__(self, rng: np.random.Generator, input_dim: int, hidden_dim: int,
                 dtype=np.float32):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.w_gates = self._param(
            "w_gates", glorot_uniform(rng, input_dim + hidden_dim, 2 * hidden_dim, dtype))
        self.b_gates = self._param("b_gates", np.zeros(2 * hidden_dim, dtype=dtype))
        self.w_cand_x = self._param(
            "w_cand_x", glorot_uniform(rng, input_dim, hidden_dim, dtype))
        self.w_cand_h = self._param(
            "w_cand_h", glorot_uniform(rng, hidden_dim, hidden_dim, dtype))
        self.b_cand = self._param("b_cand", np.zeros(hidden_dim, dtype=dtype))

    def initial(self, batch: int, dtype=np.float32) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden_dim), dtype=dtype))

    def __call__(self, hidden: Tensor, x: Tensor) -> Tensor:
        gates = sigmoid(linear(concat([x, hidden], axis=-1), self.w_gates, self.b_gates))
        update = gates[:, : self.hidden_dim]
        reset = gates[:, self.hidden_dim:]
        cand = tanh(linear(x, self.w_cand_x, self.b_cand) + matmul(reset * hidden, self.w_cand_h))
        return (1.0 - update) * hidden + update * cand
