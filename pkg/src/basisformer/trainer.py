"""AdaBelief optimization, the epoch loop with early stopping, evaluation, checkpoints, ablations."""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import ConfigError, ModelConfig
from .datapipe import DataError, Normalizer, PreparedData, Windows
from .diffcore import NonFiniteError, Tensor
from .model import BasisFormer

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"BASISFORMER-CKPT\n"
CHECKPOINT_VERSION = 1


class CheckpointError(IOError):
    pass


# -- optimizer ------------------------------------------------------------------

@dataclass
class AdaBeliefState:
    m: list[np.ndarray]
    s: list[np.ndarray]
    step: int = 0


class AdaBelief:
    """Adam-style update whose second moment tracks (g - m)^2, the 'belief' in the gradient.

    m <- b1 m + (1-b1) g
    s <- b2 s + (1-b2) (g-m)^2 + eps
    theta <- theta - lr * (m / (1-b1^t)) / (sqrt(s / (1-b2^t)) + eps)
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr, self.beta1, self.beta2 = lr, beta1, beta2
        self.eps, self.weight_decay = eps, weight_decay
        self.state = AdaBeliefState([np.zeros_like(p.data) for p in self.params],
                                    [np.zeros_like(p.data) for p in self.params])
        self.skipped = 0

    def step(self, grads: Sequence[np.ndarray] | None = None) -> bool:
        """Apply one update. Returns False (and leaves everything untouched) on non-finite grads."""
        if grads is None:
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        for g in grads:
            if not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning("non-finite gradient at step %d; update skipped", self.state.step + 1)
                return False
        st = self.state
        st.step += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** st.step
        bc2 = 1.0 - b2 ** st.step
        for p, g, m, s in zip(self.params, grads, st.m, st.s):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= b1
            m += (1.0 - b1) * g
            r = g - m
            s *= b2
            s += (1.0 - b2) * r * r + self.eps
            p.data -= (self.lr * (m / bc1) / (np.sqrt(s / bc2) + self.eps)).astype(p.data.dtype)
        return True


# -- evaluation -----------------------------------------------------------------

def predict_windows(model: BasisFormer, windows: Windows, batch: int = 256) -> np.ndarray:
    """Normalized-space forecasts (W, C, O) for every window."""
    out = [model.predict(wb.x, wb.tau) for wb in windows.batches(batch)]
    return np.concatenate(out, axis=0)


def metrics(pred: np.ndarray, target: np.ndarray) -> dict[str, float]:
    err = pred - target
    return {"mse": float(np.mean(err * err)), "mae": float(np.mean(np.abs(err)))}


def evaluate(model, windows: Windows, normalizer: Normalizer, batch: int = 256) -> dict[str, float]:
    """MSE and MAE in original units over all windows, channels and steps.

    ``model`` is a BasisFormer or any callable ``(x, tau) -> normalized forecast``.
    """
    if len(windows) == 0:
        raise DataError("cannot evaluate on an empty split")
    if isinstance(model, BasisFormer):
        pred = predict_windows(model, windows, batch)
    else:
        pred = np.concatenate([model(wb.x, wb.tau) for wb in windows.batches(batch)], axis=0)
    return metrics(normalizer.invert_cf(pred), normalizer.invert_cf(windows.y))


def val_pred_loss(model: BasisFormer, windows: Windows, batch: int = 256) -> float:
    err = predict_windows(model, windows, batch) - windows.y
    return float(np.mean(err * err))


# -- training -------------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    L_pred: float
    L_align: float
    L_smooth: float
    L: float
    val_pred: float
    seconds: float = 0.0


@dataclass
class TrainReport:
    config: ModelConfig
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = float("inf")
    stop_reason: str = ""
    skipped_steps: int = 0

    FIELDS = ("epoch", "L_pred", "L_align", "L_smooth", "L", "val_pred")

    def to_csv(self) -> str:
        """Deterministic report: header comments echo the config, one row per epoch.

        Wall-clock times are left out so seeded reruns compare byte for byte;
        see ``timings_csv``.
        """
        buf = io.StringIO()
        c = self.config
        buf.write(f"# N={c.N},H={c.H},M={c.M},bottleneck={c.bottleneck},D_c={c.D_c},"
                  f"I={c.I},O={c.O},C={c.C},basis_kind={c.basis_kind},seed={c.seed}\n")
        buf.write(f"# best_epoch={self.best_epoch},best_val_pred={self.best_val!r},"
                  f"stop_reason={self.stop_reason},skipped_steps={self.skipped_steps}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        for r in self.epochs:
            w.writerow([r.epoch] + [repr(float(getattr(r, k))) for k in self.FIELDS[1:]])
        return buf.getvalue()

    def timings_csv(self) -> str:
        return "epoch,seconds\n" + "".join(f"{r.epoch},{r.seconds:.3f}\n" for r in self.epochs)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, value: float) -> tuple[bool, bool]:
        """Returns (improved, should_stop)."""
        if value < self.best:
            self.best, self.best_epoch, self.bad = value, epoch, 0
            return True, False
        self.bad += 1
        return False, self.bad >= self.patience


def snapshot(model: BasisFormer) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in model.named_parameters()}


def restore(model: BasisFormer, params: Mapping[str, np.ndarray]) -> None:
    for name, p in model.named_parameters():
        p.data[...] = params[name]


def train(model: BasisFormer, data: PreparedData, cfg: ModelConfig | None = None,
          checkpoint_path: str | Path | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainReport:
    """Fit ``model`` on the train windows; the best-validation parameters are restored at the end."""
    cfg = (cfg or model.cfg).validate()
    if data.C != model.cfg.C:
        raise ConfigError(f"data has C={data.C} channels but the model expects C={model.cfg.C}")
    rng = np.random.default_rng(cfg.seed + 1)
    params = model.parameters()
    opt = AdaBelief(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.opt_eps, cfg.weight_decay)
    stopper = EarlyStopping(cfg.patience)
    report = TrainReport(cfg)
    best = snapshot(model)

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        sums = np.zeros(4)
        count = 0
        try:
            for wb in data.train.batches(cfg.batch, rng):
                model.zero_grad()
                parts = model.loss(wb.x, wb.y, wb.tau)
                parts.total.backward()
                opt.step()
                n = len(wb.t)
                sums += n * np.array([parts.pred, parts.align, parts.smooth, parts.total.item()])
                count += n
        except NonFiniteError as exc:
            log.error("epoch %d aborted: %s", epoch, exc)
            report.stop_reason = f"non-finite loss in epoch {epoch}: {exc}"
            break
        val = val_pred_loss(model, data.val)
        means = sums / max(count, 1)
        rec = EpochRecord(epoch, *means, val, time.perf_counter() - t0)
        report.epochs.append(rec)
        improved, stop = stopper.update(epoch, val)
        if improved:
            best = snapshot(model)
            if checkpoint_path is not None:
                save_checkpoint(model, checkpoint_path, normalizer=data.normalizer,
                                T_total=data.T_total)
        log.info("epoch %d  L=%.5g  pred=%.5g  align=%.5g  smooth=%.5g  val=%.5g  (%.1fs)",
                 epoch, rec.L, rec.L_pred, rec.L_align, rec.L_smooth, val, rec.seconds)
        if on_epoch is not None:
            on_epoch(rec)
        if stop:
            report.stop_reason = f"patience {cfg.patience} exhausted"
            break
    else:
        report.stop_reason = f"reached {cfg.epochs} epochs"

    restore(model, best)
    report.best_epoch, report.best_val = stopper.best_epoch, stopper.best
    report.skipped_steps = opt.skipped
    return report


# -- checkpoints ----------------------------------------------------------------

def save_checkpoint(model: BasisFormer, path: str | Path, normalizer: Normalizer | None = None,
                    T_total: int | None = None, extra: dict | None = None) -> None:
    """Versioned self-describing file: magic line, JSON header line, raw little-endian blocks."""
    blocks = []
    entries = []
    offset = 0
    arrays = [(name, p.data) for name, p in model.named_parameters()]
    if normalizer is not None:
        arrays += [("normalizer.mean", normalizer.mean), ("normalizer.std", normalizer.std)]
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blocks.append(raw)
        offset += len(raw)
    header = {"version": CHECKPOINT_VERSION, "config": model.cfg.to_dict(), "arrays": entries,
              "T_total": T_total, "extra": extra or {}}
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for raw in blocks:
            fh.write(raw)


@dataclass
class Checkpoint:
    model: BasisFormer
    normalizer: Normalizer | None
    T_total: int | None
    extra: dict


def load_checkpoint(path: str | Path, expect: ModelConfig | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    nl = blob.find(b"\n", len(CHECKPOINT_MAGIC))
    if nl < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[len(CHECKPOINT_MAGIC):nl])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {header.get('version')} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    cfg = ModelConfig.from_dict(header["config"])
    if expect is not None:
        differing = expect.diff(cfg)
        if differing:
            raise ConfigError(f"checkpoint config differs from expected in key(s): {', '.join(differing)}")
    body = blob[nl + 1:]
    need = sum(e["nbytes"] for e in header["arrays"])
    if len(body) != need:
        raise CheckpointError(f"{path}: payload has {len(body)} bytes, header promises {need} (truncated?)")
    arrays = {}
    for e in header["arrays"]:
        raw = body[e["offset"]:e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    model = BasisFormer(cfg)
    names = [n for n, _ in model.named_parameters()]
    missing = [n for n in names if n not in arrays]
    if missing:
        raise CheckpointError(f"{path}: missing parameter block(s): {', '.join(missing[:5])}")
    restore(model, arrays)
    norm = None
    if "normalizer.mean" in arrays:
        norm = Normalizer(arrays["normalizer.mean"], arrays["normalizer.std"])
    return Checkpoint(model, norm, header.get("T_total"), header.get("extra", {}))


# -- ablations ------------------------------------------------------------------

@dataclass
class VariantResult:
    variant: str
    seed: int
    mse: float = float("nan")
    mae: float = float("nan")
    best_epoch: int = 0
    error: str = ""


def run_ablation(grid: Mapping[str, Mapping], base: ModelConfig, seeds: Sequence[int],
                 data: PreparedData | Callable[[int], PreparedData],
                 on_result: Callable[[VariantResult], None] | None = None) -> list[VariantResult]:
    """Train every (variant, seed) pair and score it on the test split.

    ``grid`` maps a variant name to config overrides. A failing variant is
    recorded with its error and the remaining runs proceed.
    """
    results = []
    for name, overrides in grid.items():
        for seed in seeds:
            res = VariantResult(name, seed)
            try:
                cfg = base.replace(**dict(overrides), seed=seed).validate()
                d = data(seed) if callable(data) else data
                model = BasisFormer(cfg)
                rep = train(model, d, cfg)
                res.best_epoch = rep.best_epoch
                m = evaluate(model, d.test, d.normalizer)
                res.mse, res.mae = m["mse"], m["mae"]
            except Exception as exc:  # noqa: BLE001 - keep the sweep going
                log.error("variant %s seed %d failed: %s", name, seed, exc)
                res.error = f"{type(exc).__name__}: {exc}"
            results.append(res)
            if on_result is not None:
                on_result(res)
    return results


def summarize_ablation(results: Sequence[VariantResult]) -> list[dict]:
    rows = []
    for name in dict.fromkeys(r.variant for r in results):
        ok = [r for r in results if r.variant == name and not r.error]
        failed = [r for r in results if r.variant == name and r.error]
        rows.append({
            "variant": name,
            "runs": len(ok),
            "failed": len(failed),
            "median_mse": statistics.median(r.mse for r in ok) if ok else float("nan"),
            "median_mae": statistics.median(r.mae for r in ok) if ok else float("nan"),
        })
    return rows


def ablation_csv(results: Sequence[VariantResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "runs", "failed", "median_mse", "median_mae"])
    for row in summarize_ablation(results):
        w.writerow([row["variant"], row["runs"], row["failed"],
                    repr(row["median_mse"]), repr(row["median_mae"])])
    return buf.getvalue()
