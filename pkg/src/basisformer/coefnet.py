"""Series/basis coefficients via stacked bidirectional cross-attention.

Attention runs across the set axis (channels on one side, basis vectors on
the other), never across time. Each of the H heads has width D_c; head
outputs are concatenated and a restore layer maps them back to D_c.
"""

from __future__ import annotations

import numpy as np

from .diffcore import DimensionError, Tensor, matmul, softmax
from .layers import MLP, LayerNorm, Linear, Module


def _split_heads(t: Tensor, H: int, D: int) -> Tensor:
    # (..., S, H*D) -> (..., H, S, D)
    lead = t.shape[:-2]
    S = t.shape[-2]
    t = t.reshape(lead + (S, H, D))
    k = len(lead)
    return t.permute(tuple(range(k)) + (k + 1, k, k + 2))


def _merge_heads(t: Tensor) -> Tensor:
    # (..., H, S, D) -> (..., S, H*D)
    lead = t.shape[:-3]
    H, S, D = t.shape[-3:]
    k = len(lead)
    t = t.permute(tuple(range(k)) + (k + 1, k, k + 2))
    return t.reshape(lead + (S, H * D))


class CAB(Module):
    """Cross-attention block: queries from ``a``, keys and values from ``b``."""

    def __init__(self, D: int, H: int, rng: np.random.Generator, activation: str = "relu",
                 ffn_mult: int = 2, ln_eps: float = 1e-5, dtype=np.float64):
        self.D, self.H = D, H
        self.wq = Linear(D, H * D, rng, dtype)
        self.wk = Linear(D, H * D, rng, dtype)
        self.wv = Linear(D, H * D, rng, dtype)
        self.restore = Linear(H * D, D, rng, dtype)
        self.ffn = MLP([D, ffn_mult * D, D], rng, activation, dtype)
        self.ln1 = LayerNorm(D, ln_eps, dtype)
        self.ln2 = LayerNorm(D, ln_eps, dtype)
        self.last_attention: np.ndarray | None = None

    def attend(self, a: Tensor, b: Tensor) -> Tensor:
        q = _split_heads(self.wq(a), self.H, self.D)
        k = _split_heads(self.wk(b), self.H, self.D)
        v = _split_heads(self.wv(b), self.H, self.D)
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.D))
        weights = softmax(scores, axis=-1)
        self.last_attention = weights.data
        return self.restore(_merge_heads(matmul(weights, v)))

    def __call__(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[-1] != self.D or b.shape[-1] != self.D:
            raise DimensionError(f"CAB width {self.D} does not match inputs {a.shape}, {b.shape}")
        a_hat = self.ln1(self.attend(a, b) + a)
        return self.ln2(self.ffn(a_hat) + a_hat)


class BCAB(Module):
    """Two CABs with separate parameters, both fed the same layer inputs."""

    def __init__(self, D: int, H: int, rng: np.random.Generator, **kw):
        self.ab = CAB(D, H, rng, **kw)
        self.ba = CAB(D, H, rng, **kw)

    def __call__(self, a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
        return self.ab(a, b), self.ba(b, a)


def embed_series(x: Tensor, proj: Linear) -> Tensor:
    if x.shape[-1] != proj.n_in:
        raise DimensionError(
            f"series length {x.shape[-1]} does not match projection input {proj.n_in}")
    return proj(x)


def head_dot(rep_x: Tensor, rep_z: Tensor) -> Tensor:
    """Per-head inner products: (..., H, C, D) x (..., H, N, D) -> (..., C, N, H)."""
    c = matmul(rep_x, rep_z.swapaxes(-1, -2))
    k = c.ndim - 3
    return c.permute(tuple(range(k)) + (k + 1, k + 2, k))


class CoefNet(Module):
    """Projects both sides to width D_c, runs M BCAB layers, maps to H heads, takes dot products.

    The BCAB stack and head mapping are shared by the history and future
    views; only the length-specific input projections differ.
    """

    def __init__(self, I: int, O: int, D: int, H: int, M: int,  # noqa: E741
                 rng: np.random.Generator, activation: str = "relu", ln_eps: float = 1e-5,
                 dtype=np.float64):
        self.I, self.O, self.D, self.H = I, O, D, H
        self.series_hist = Linear(I, D, rng, dtype)
        self.series_fut = Linear(O, D, rng, dtype)
        self.basis_hist = Linear(I, D, rng, dtype)
        self.basis_fut = Linear(O, D, rng, dtype)
        self.layers = [BCAB(D, H, rng, activation=activation, ln_eps=ln_eps, dtype=dtype)
                       for _ in range(M)]
        self.head_map = Linear(D, D * H, rng, dtype)

    def representations(self, x: Tensor, z: Tensor, view: str) -> tuple[Tensor, Tensor]:
        """Head representations shaped (..., H, count, D_c)."""
        if view == "hist":
            xs, zs = embed_series(x, self.series_hist), embed_series(z, self.basis_hist)
        elif view == "fut":
            xs, zs = embed_series(x, self.series_fut), embed_series(z, self.basis_fut)
        else:
            raise ValueError(f"view must be 'hist' or 'fut', got {view!r}")
        for layer in self.layers:
            xs, zs = layer(xs, zs)
        return (_split_heads(self.head_map(xs), self.H, self.D),
                _split_heads(self.head_map(zs), self.H, self.D))

    def __call__(self, x: Tensor, z: Tensor, view: str = "hist") -> Tensor:
        """Coefficient tensor (..., C, N, H) between series rows and basis rows."""
        rx, rz = self.representations(x, z, view)
        return head_dot(rx, rz)

    compute_coef = __call__
