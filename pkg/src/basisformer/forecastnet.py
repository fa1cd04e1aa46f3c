"""Forecast head: project the future basis, split into heads, aggregate with coefficients, fuse."""

from __future__ import annotations

import numpy as np

from .config import ConfigError
from .diffcore import DimensionError, Tensor, matmul
from .layers import MLP, Module


def bottleneck_widths(O: int, bottleneck: int) -> list[int]:  # noqa: E741
    return [O, bottleneck, bottleneck, O]


def split_heads(z: Tensor, H: int) -> Tensor:
    """(..., N, O) -> (..., N, H, O/H) by contiguous chunks of the time axis."""
    O = z.shape[-1]  # noqa: E741
    if O % H:
        raise ConfigError(f"H must divide O (H={H}, O={O})")
    return z.reshape(z.shape[:-1] + (H, O // H))


def merge_heads(z: Tensor) -> Tensor:
    return z.reshape(z.shape[:-2] + (z.shape[-2] * z.shape[-1],))


def aggregate(c: Tensor, z_heads: Tensor) -> Tensor:
    """Coefficient-weighted sum over the basis axis, per head.

    c: (..., C, N, H), z_heads: (..., N, H, P) -> (..., C, H, P) with
    out[i, h] = sum_j c[i, j, h] * z_heads[j, h].
    """
    if c.shape[-2] != z_heads.shape[-3] or c.shape[-1] != z_heads.shape[-2]:
        raise DimensionError(f"aggregate shape mismatch: c {c.shape}, basis heads {z_heads.shape}")
    k = c.ndim - 3
    lead = tuple(range(k))
    c_h = c.permute(lead + (k + 2, k, k + 1))          # (..., H, C, N)
    z_h = z_heads.permute(lead + (k + 1, k, k + 2))    # (..., H, N, P)
    out = matmul(c_h, z_h)                             # (..., H, C, P)
    return out.permute(lead + (k + 1, k, k + 2))


class ForecastNet(Module):
    def __init__(self, O: int, H: int, bottleneck: int, rng: np.random.Generator,  # noqa: E741
                 activation: str = "relu", dtype=np.float64):
        if O % H:
            raise ConfigError(f"H must divide O (H={H}, O={O})")
        self.O, self.H = O, H
        self.project = MLP(bottleneck_widths(O, bottleneck), rng, activation, dtype)
        self.fuse = MLP(bottleneck_widths(O, bottleneck), rng, activation, dtype)

    def project_future_basis(self, z_y: Tensor) -> Tensor:
        if z_y.shape[-1] != self.O:
            raise DimensionError(f"future basis length {z_y.shape[-1]} != O={self.O}")
        return self.project(z_y)

    def fuse_heads(self, y_heads: Tensor) -> Tensor:
        return self.fuse(merge_heads(y_heads))

    def __call__(self, c: Tensor, z_y: Tensor) -> Tensor:
        z_heads = split_heads(self.project_future_basis(z_y), self.H)
        return self.fuse_heads(aggregate(c, z_heads))
