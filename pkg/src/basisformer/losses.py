"""Prediction, alignment (InfoNCE) and smoothness objectives."""

from __future__ import annotations

import numpy as np

from .config import ConfigError, LossWeights
from .diffcore import DimensionError, NonFiniteError, Tensor, log_softmax, matmul


def mse_loss(pred: Tensor, target) -> Tensor:
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=pred.dtype))
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    d = pred - target
    return (d * d).mean()


def infonce_loss(c_x: Tensor, c_y: Tensor, epsilon: float = 1.0) -> Tensor:
    """Contrastive alignment of history-view and future-view coefficients.

    For every channel i and basis j the anchor ``c_x[i, j, :]`` is scored
    against ``c_y[i, k, :]`` for all k; k == j is the positive. Scores are
    head-axis dot products divided by ``epsilon``. Returns the mean negative
    log-probability of the positive over all (i, j) and any leading batch axes.
    """
    if epsilon <= 0:
        raise ConfigError(f"temperature must be > 0 (got {epsilon})")
    if c_x.shape != c_y.shape:
        raise DimensionError(f"infonce_loss shape mismatch: {c_x.shape} vs {c_y.shape}")
    N = c_x.shape[-2]
    logits = matmul(c_x, c_y.swapaxes(-1, -2)) * (1.0 / epsilon)   # (..., C, N, N)
    logp = log_softmax(logits, axis=-1)
    positive = (logp * np.eye(N, dtype=c_x.dtype)).sum(axis=-1)    # (..., C, N)
    return -positive.mean()


def smoothness_matrix(L: int) -> np.ndarray:
    """Banded (L, L-2) second-difference operator with columns [1, -2, 1]."""
    if L < 3:
        raise ConfigError(f"smoothness needs at least 3 time steps (got {L})")
    S = np.zeros((L, L - 2))
    for t in range(L - 2):
        S[t, t], S[t + 1, t], S[t + 2, t] = 1.0, -2.0, 1.0
    return S


def smoothness_loss(z: Tensor) -> Tensor:
    """Squared Frobenius norm of the basis' second differences along time.

    For a batch of bases (..., N, L) the per-window sums are averaged over the
    leading axes.
    """
    L = z.shape[-1]
    if L < 3:
        raise ConfigError(f"smoothness needs at least 3 time steps (got {L})")
    d2 = z[..., :-2] - 2.0 * z[..., 1:-1] + z[..., 2:]
    total = (d2 * d2).sum()
    n_windows = int(np.prod(z.shape[:-2])) if z.ndim > 2 else 1
    return total * (1.0 / n_windows) if n_windows > 1 else total


def total_loss(pred: Tensor, align: Tensor, smooth: Tensor,
               weights: LossWeights | None = None) -> Tensor:
    w = weights or LossWeights()
    for name, term in (("L_pred", pred), ("L_align", align), ("L_smooth", smooth)):
        if not np.all(np.isfinite(term.data)):
            raise NonFiniteError(f"{name} is not finite ({term.data!r})")
    return pred * w.pred + align * w.align + smooth * w.smooth
