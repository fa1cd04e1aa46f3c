"""Parameter containers built on diffcore: Module, Linear, MLP, LayerNorm."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .diffcore import DEFAULT_DTYPE, DimensionError, Tensor, layernorm

ACTIVATIONS = ("relu", "gelu", "tanh", "identity")


def activate(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return x.relu()
    if kind == "gelu":
        return x.gelu()
    if kind == "tanh":
        return x.tanh()
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}; choose from {ACTIVATIONS}")


class Module:
    """Walks attributes (and lists of modules) to find parameters in a stable order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


def _uniform(rng: np.random.Generator, shape, bound: float, dtype) -> Tensor:
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


class Linear(Module):
    """Affine map ``x @ weight + bias`` over the trailing axis, fan-in uniform init."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        bound = 1.0 / np.sqrt(n_in)
        self.weight = _uniform(rng, (n_in, n_out), bound, dtype)
        self.bias = _uniform(rng, (n_out,), bound, dtype)

    @property
    def n_in(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise DimensionError(
                f"Linear expects trailing extent {self.n_in}, got input shape {x.shape}")
        return x @ self.weight + self.bias


class MLP(Module):
    """Stack of Linear layers with ``activation`` between them; last layer is linear."""

    def __init__(self, widths: Sequence[int], rng: np.random.Generator,
                 activation: str = "relu", dtype=DEFAULT_DTYPE):
        if len(widths) < 2:
            raise ValueError("MLP needs at least an input and an output width")
        self.activation = activation
        self.layers = [Linear(a, b, rng, dtype) for a, b in zip(widths[:-1], widths[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = activate(x, self.activation)
        return x


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=DEFAULT_DTYPE):
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.gamma, self.beta, self.eps)
