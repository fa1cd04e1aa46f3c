"""Desk-scale synthetic experiments shared by scripts/ and the acceptance suite."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .config import LOSS_ARMS, ModelConfig
from .datapipe import PreparedData, SynthSpec, persistence_forecast, prepare_data, synth_generate
from .model import BasisFormer
from .trainer import evaluate, metrics, train

# C=8 channels, 4000 steps, tones at periods 24/48/96, noise 0.1; I=O=96, H=8
SYNTH_TONES = dict(channels=8, length=4000, periods=(24.0, 48.0, 96.0), noise=0.1)

ARMS = {
    "full": {},
    "random-sine": {"basis_kind": "random-sine"},
    "pred-only": dict(LOSS_ARMS["none"]),
}


def synth_config(seed: int, **overrides) -> ModelConfig:
    # float32 halves the step time; gradients are verified separately in float64
    base = dict(C=8, I=96, O=96, H=8, seed=seed, dtype="float32")
    base.update(overrides)
    return ModelConfig(**base).validate()


def synth_data(seed: int, cfg: ModelConfig) -> PreparedData:
    raw = synth_generate(SynthSpec(seed=seed, **SYNTH_TONES))
    return prepare_data(raw, cfg.I, cfg.O, cfg.split, cfg.stride, cfg.eval_stride)


def persistence_scores(data: PreparedData) -> dict[str, float]:
    """Test MSE of the two persistence readings, in original units."""
    target = data.normalizer.invert_cf(data.test.y)
    O = data.test.y.shape[-1]  # noqa: E741
    out = {}
    for mode in ("seasonal", "last"):
        pred = data.normalizer.invert_cf(persistence_forecast(data.test.x, O, mode))
        out[mode] = metrics(pred, target)["mse"]
    return out


@dataclass
class ArmRun:
    arm: str
    seed: int
    mse: float
    mae: float
    best_epoch: int
    epochs_run: int
    seconds: float
    persistence_seasonal: float
    persistence_last: float


def run_arm(arm: str, seed: int, **overrides) -> ArmRun:
    cfg = synth_config(seed, **{**ARMS[arm], **overrides})
    data = synth_data(seed, cfg)
    pers = persistence_scores(data)
    model = BasisFormer(cfg)
    t0 = time.perf_counter()
    rep = train(model, data, cfg)
    seconds = time.perf_counter() - t0
    m = evaluate(model, data.test, data.normalizer)
    return ArmRun(arm, seed, m["mse"], m["mae"], rep.best_epoch, len(rep.epochs), seconds,
                  pers["seasonal"], pers["last"])


def median_mse(runs: list[ArmRun], arm: str) -> float:
    return statistics.median(r.mse for r in runs if r.arm == arm)


def inference_seconds(O: int, C: int = 8, I: int = 96, repeats: int = 30,  # noqa: E741
                      seed: int = 0) -> float:
    """Median wall time of a single-window forecast at horizon ``O``."""
    cfg = ModelConfig(C=C, I=I, O=O, seed=seed)
    model = BasisFormer(cfg)
    x = np.random.default_rng(seed).normal(size=(C, I))
    model.predict(x, 0.5)  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        model.predict(x, 0.5)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)
