"""Model and training configuration."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

BASIS_KINDS = ("learnable", "fixed-sine-grid", "random-sine")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    # data shape
    C: int = 1
    I: int = 96  # noqa: E741
    O: int = 96  # noqa: E741
    # architecture
    N: int = 10
    H: int = 16
    M: int = 2
    D_c: int = 100
    bottleneck: int = 48
    basis_hidden: int = 512
    basis_kind: str = "learnable"
    activation: str = "relu"
    ln_eps: float = 1e-5
    # objective
    epsilon: float = 1.0
    w_pred: float = 1.0
    w_align: float = 1.0
    w_smooth: float = 1.0
    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    opt_eps: float = 1e-8
    weight_decay: float = 0.0
    # loop
    seed: int = 0
    epochs: int = 30
    patience: int = 3
    batch: int = 32
    stride: int = 1
    eval_stride: int = 1
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    dtype: str = "float64"

    def errors(self) -> list[str]:
        errs = []
        for name in ("C", "I", "O", "N", "H", "M", "D_c", "bottleneck", "basis_hidden",
                     "epochs", "batch", "stride", "eval_stride"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1 (got {getattr(self, name)})")
        if self.patience < 1:
            errs.append(f"patience must be >= 1 (got {self.patience})")
        if self.H >= 1 and self.O % self.H:
            errs.append(f"H must divide O (H={self.H}, O={self.O})")
        if self.bottleneck >= self.O:
            errs.append(f"bottleneck must be < O (bottleneck={self.bottleneck}, O={self.O})")
        if self.epsilon <= 0:
            errs.append(f"epsilon must be > 0 (got {self.epsilon})")
        for name in ("w_pred", "w_align", "w_smooth", "lr", "weight_decay"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be >= 0 (got {getattr(self, name)})")
        if self.basis_kind not in BASIS_KINDS:
            errs.append(f"basis_kind must be one of {BASIS_KINDS} (got {self.basis_kind!r})")
        if self.basis_kind == "fixed-sine-grid" and self.N % 2:
            errs.append(f"fixed-sine-grid needs an even N (got {self.N})")
        if self.activation not in ("relu", "gelu", "tanh"):
            errs.append(f"activation must be relu, gelu or tanh (got {self.activation!r})")
        if self.dtype not in ("float64", "float32"):
            errs.append(f"dtype must be float64 or float32 (got {self.dtype!r})")
        if len(self.split) != 3 or any(r < 0 for r in self.split) or abs(sum(self.split) - 1) > 1e-9:
            errs.append(f"split ratios must be three nonnegative numbers summing to 1 (got {self.split})")
        elif min(self.split) <= 0:
            errs.append(f"train, val and test split ratios must all be positive (got {self.split})")
        return errs

    def validate(self) -> "ModelConfig":
        errs = self.errors()
        if errs:
            raise ConfigError("invalid config:\n  " + "\n  ".join(errs))
        return self

    def replace(self, **overrides) -> "ModelConfig":
        return dataclasses.replace(self, **overrides)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kw = dict(d)
        if "split" in kw:
            kw["split"] = tuple(float(r) for r in kw["split"])
        return cls(**kw)

    def diff(self, other: "ModelConfig") -> list[str]:
        a, b = self.to_dict(), other.to_dict()
        return [k for k in a if a[k] != b[k]]

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config_file(path: str | Path) -> dict:
    """Read a flat JSON object of config keys."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config file must hold a JSON object")
    return data


@dataclass
class LossWeights:
    pred: float = 1.0
    align: float = 1.0
    smooth: float = 1.0

    @classmethod
    def from_config(cls, cfg: ModelConfig) -> "LossWeights":
        return cls(cfg.w_pred, cfg.w_align, cfg.w_smooth)


LOSS_ARMS = {
    "none": dict(w_align=0.0, w_smooth=0.0),
    "infonce": dict(w_align=1.0, w_smooth=0.0),
    "smooth": dict(w_align=0.0, w_smooth=1.0),
    "infonce+smooth": dict(w_align=1.0, w_smooth=1.0),
}
