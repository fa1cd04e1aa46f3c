"""Basis generation: a timestamp-conditioned MLP and fixed sine/cosine alternatives."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .config import ConfigError, ModelConfig
from .diffcore import Tensor
from .layers import Linear, Module, activate


def normalize_timestamp(t: int, T: int) -> float:
    """Window start index scaled into [0, 1)."""
    if T <= 0 or not 0 <= t < T:
        raise ValueError(f"timestamp index t={t} outside [0, {T})")
    return t / T


def split_basis(z, I: int):  # noqa: E741
    """Split along time into the history part (first I columns) and the future part."""
    if z.shape[-1] <= I:
        raise ValueError(f"basis has {z.shape[-1]} columns, cannot split at {I}")
    return z[..., :I], z[..., I:]


def _as_tau_column(tau, dtype) -> tuple[np.ndarray, bool]:
    arr = np.asarray(tau, dtype=dtype)
    scalar = arr.ndim == 0
    if not np.all(np.isfinite(arr)):
        raise ValueError("timestamp must be finite")
    return arr.reshape(-1, 1), scalar


class BasisNet(Module):
    """Four affine layers mapping tau to an N x (I+O) basis.

    The skip connection adds the first hidden state to the output of the
    second layer's block, since the scalar input itself cannot be added to a
    hidden vector.
    """

    def __init__(self, N: int, length: int, rng: np.random.Generator, hidden: int = 512,
                 activation: str = "relu", dtype=np.float64):
        self.N = N
        self.length = length
        self.activation = activation
        self.l1 = Linear(1, hidden, rng, dtype)
        self.l2 = Linear(hidden, hidden, rng, dtype)
        self.l3 = Linear(hidden, hidden, rng, dtype)
        self.l4 = Linear(hidden, N * length, rng, dtype)
        self._dtype = dtype

    def __call__(self, tau) -> Tensor:
        col, scalar = _as_tau_column(tau, self._dtype)
        x = Tensor(col)
        h1 = activate(self.l1(x), self.activation)
        h2 = activate(self.l2(h1), self.activation) + h1
        h3 = activate(self.l3(h2), self.activation)
        z = self.l4(h3).reshape(-1, self.N, self.length)
        return z[0] if scalar else z


class FixedBasis(Module):
    """Parameter-free basis shared by every window (ablation baselines)."""

    def __init__(self, kind: str, N: int, I: int, O: int, seed: int = 0,  # noqa: E741
                 dtype=np.float64):
        self.kind = kind
        self.N = N
        self.length = I + O
        t = np.arange(self.length, dtype=np.float64)
        if kind == "fixed-sine-grid":
            if N % 2:
                raise ConfigError(f"fixed-sine-grid needs an even N (got {N})")
            # periods from I down to 2, evenly spaced in frequency
            freqs = np.linspace(1.0 / I, 0.5, N // 2)
            rows = [np.sin(2 * np.pi * f * t) for f in freqs]
            rows += [np.cos(2 * np.pi * f * t) for f in freqs]
        elif kind == "random-sine":
            rng = np.random.default_rng(seed)
            n_sin = (N + 1) // 2
            freqs = rng.uniform(1.0 / self.length, 0.5, size=n_sin)
            rows = [np.sin(2 * np.pi * f * t) for f in freqs]
            rows += [np.cos(2 * np.pi * f * t) for f in freqs[: N - n_sin]]
        else:
            raise ConfigError(f"unknown fixed basis kind {kind!r}")
        self.frequencies = freqs
        self.basis = np.stack(rows).astype(dtype)

    def __call__(self, tau) -> Tensor:
        col, scalar = _as_tau_column(tau, self.basis.dtype)
        if scalar:
            return Tensor(self.basis.copy())
        return Tensor(np.broadcast_to(self.basis, (len(col),) + self.basis.shape).copy())


def build_basis(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float64) -> Module:
    if cfg.basis_kind == "learnable":
        return BasisNet(cfg.N, cfg.I + cfg.O, rng, cfg.basis_hidden, cfg.activation, dtype)
    return FixedBasis(cfg.basis_kind, cfg.N, cfg.I, cfg.O, seed=cfg.seed, dtype=dtype)


def write_basis_csv(z: np.ndarray, path: str | Path, I: int) -> None:  # noqa: E741
    """One row per basis vector; a trailing column records the history/future boundary."""
    z = np.asarray(z)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"t{j}" for j in range(z.shape[1])] + ["boundary"])
        for row in z:
            w.writerow([repr(float(v)) for v in row] + [I])
