"""The assembled forecaster: basis generator, coefficient network and forecast head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basisnet import build_basis, split_basis
from .coefnet import CoefNet
from .config import LossWeights, ModelConfig
from .diffcore import DimensionError, Tensor, no_grad
from .forecastnet import ForecastNet
from .layers import Module
from .losses import infonce_loss, mse_loss, smoothness_loss, total_loss


@dataclass
class LossParts:
    total: Tensor
    pred: float
    align: float
    smooth: float

    def as_row(self) -> dict[str, float]:
        return {"L_pred": self.pred, "L_align": self.align, "L_smooth": self.smooth,
                "L": self.total.item()}


class BasisFormer(Module):
    def __init__(self, cfg: ModelConfig):
        cfg.validate()
        self.cfg = cfg
        self.np_dtype = np.dtype(cfg.dtype)
        rng = np.random.default_rng(cfg.seed)
        self.basis = build_basis(cfg, rng, self.np_dtype)
        self.coef = CoefNet(cfg.I, cfg.O, cfg.D_c, cfg.H, cfg.M, rng, cfg.activation,
                            cfg.ln_eps, self.np_dtype)
        self.head = ForecastNet(cfg.O, cfg.H, cfg.bottleneck, rng, cfg.activation, self.np_dtype)

    def _tensor(self, a) -> Tensor:
        return a if isinstance(a, Tensor) else Tensor(np.asarray(a, dtype=self.np_dtype))

    def generate_basis(self, tau) -> Tensor:
        return self.basis(tau)

    def _check_series(self, x: Tensor, length: int, what: str) -> None:
        if x.ndim < 2 or x.shape[-1] != length or x.shape[-2] != self.cfg.C:
            raise DimensionError(
                f"{what} must have shape (..., C={self.cfg.C}, {length}), got {x.shape}")

    def forecast(self, x, tau) -> Tensor:
        """Predict (..., C, O) from history (..., C, I) and window timestamp(s).

        The future series is not an argument: inference never sees it.
        """
        x = self._tensor(x)
        self._check_series(x, self.cfg.I, "history")
        z = self.generate_basis(tau)
        z_x, z_y = split_basis(z, self.cfg.I)
        c_x = self.coef(x, z_x, "hist")
        return self.head(c_x, z_y)

    def predict(self, x, tau) -> np.ndarray:
        with no_grad():
            return self.forecast(x, tau).data

    def loss(self, x, y, tau, weights: LossWeights | None = None) -> LossParts:
        """Total objective for a batch of windows (both views)."""
        w = weights or LossWeights.from_config(self.cfg)
        x, y = self._tensor(x), self._tensor(y)
        self._check_series(x, self.cfg.I, "history")
        self._check_series(y, self.cfg.O, "future")
        z = self.generate_basis(tau)
        z_x, z_y = split_basis(z, self.cfg.I)
        c_x = self.coef(x, z_x, "hist")
        pred = mse_loss(self.head(c_x, z_y), y)
        if w.align == 0:
            # alignment is logged but carries no gradient in this arm
            with no_grad():
                align = infonce_loss(c_x.detach(), self.coef(y, z_y.detach(), "fut"),
                                     self.cfg.epsilon)
        else:
            align = infonce_loss(c_x, self.coef(y, z_y, "fut"), self.cfg.epsilon)
        smooth = smoothness_loss(z)
        total = total_loss(pred, align, smooth, w)
        return LossParts(total, pred.item(), align.item(), smooth.item())
