"""CSV ingestion, chronological splits, normalization, sliding windows and synthetic series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .config import ConfigError


class DataError(ValueError):
    pass


@dataclass
class RawSeries:
    names: list[str]
    values: np.ndarray  # (T, C)
    timestamps: list[str] | None = None

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]


def load_csv(path: str | Path) -> RawSeries:
    """Read ``timestamp,ch1,ch2,...`` with one header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: file is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) < 2:
        raise DataError(f"{path}: need a timestamp column and at least one channel")
    if not body:
        raise DataError(f"{path}: no data rows (empty series)")
    width = len(header)
    values = np.empty((len(body), width - 1))
    stamps = []
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} fields, expected {width}")
        stamps.append(row[0])
        for c, cell in enumerate(row[1:]):
            if cell.strip() == "":
                raise DataError(f"{path}: missing value at row {line}, column {c + 2} ({header[c + 1]})")
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {cell!r} at row {line}, column {c + 2} ({header[c + 1]})"
                ) from None
            if not math.isfinite(values[r, c]):
                raise DataError(f"{path}: non-finite value at row {line}, column {c + 2}")
    return RawSeries([h.strip() for h in header[1:]], values, stamps)


def write_csv(series: RawSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + series.names)
        stamps = series.timestamps or [str(t) for t in range(series.T)]
        for stamp, row in zip(stamps, series.values):
            w.writerow([stamp] + [repr(float(v)) for v in row])


# -- splitting and normalization ---------------------------------------------

@dataclass
class Segment:
    start: int           # absolute index of the first row
    values: np.ndarray   # (length, C)

    def __len__(self) -> int:
        return self.values.shape[0]


def split_lengths(T: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ConfigError(f"split ratios must be three nonnegative numbers summing to 1, got {tuple(ratios)}")
    n_train = int(round(T * ratios[0]))
    n_val = int(round(T * ratios[1]))
    return n_train, n_val, T - n_train - n_val


def chrono_split(values: np.ndarray, ratios: Sequence[float], min_length: int
                 ) -> tuple[Segment, Segment, Segment]:
    """Contiguous train/val/test segments; every segment must hold one window."""
    lengths = split_lengths(len(values), ratios)
    segs = []
    start = 0
    for name, n in zip(("train", "val", "test"), lengths):
        if n < min_length:
            raise ConfigError(
                f"{name} segment has {n} rows; each segment needs at least I+O={min_length}")
        segs.append(Segment(start, values[start:start + n]))
        start += n
    return tuple(segs)


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, train: np.ndarray, names: Sequence[str] | None = None) -> "Normalizer":
        """Per-channel mean and population standard deviation of the train rows."""
        train = np.asarray(train, dtype=np.float64)
        if train.size == 0:
            raise DataError("cannot fit a normalizer on an empty train segment")
        mean = train.mean(axis=0)
        std = train.std(axis=0)
        for c, s in enumerate(std):
            if not s > 0:
                label = names[c] if names is not None else str(c)
                raise DataError(f"channel {label!r} has zero variance in the train segment")
        return cls(mean, std)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Normalize values whose trailing axis is the channel axis."""
        return (v - self.mean) / self.std

    def invert(self, v: np.ndarray) -> np.ndarray:
        return v * self.std + self.mean

    def apply_cf(self, v: np.ndarray) -> np.ndarray:
        """Same as ``apply`` for channel-first arrays (..., C, L)."""
        return (v - self.mean[:, None]) / self.std[:, None]

    def invert_cf(self, v: np.ndarray) -> np.ndarray:
        return v * self.std[:, None] + self.mean[:, None]


# -- windows ------------------------------------------------------------------

@dataclass
class WindowBatch:
    x: np.ndarray    # (C, I) or (B, C, I)
    y: np.ndarray    # (C, O) or (B, C, O)
    tau: np.ndarray | float
    t: np.ndarray | int


@dataclass
class Windows:
    """All windows of one segment, channel-first."""
    x: np.ndarray    # (W, C, I)
    y: np.ndarray    # (W, C, O)
    t: np.ndarray    # (W,) absolute index of each window's first history row
    T_total: int

    @property
    def tau(self) -> np.ndarray:
        return self.t / self.T_total

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i) -> WindowBatch:
        return WindowBatch(self.x[i], self.y[i], self.tau[i], self.t[i])

    def __iter__(self) -> Iterator[WindowBatch]:
        return (self[i] for i in range(len(self)))

    def batches(self, size: int, rng: np.random.Generator | None = None) -> Iterator[WindowBatch]:
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for s in range(0, len(order), size):
            yield self[order[s:s + size]]


def make_windows(segment: Segment | np.ndarray, I: int, O: int, stride: int = 1,  # noqa: E741
                 T_total: int | None = None, start: int = 0) -> Windows:
    if isinstance(segment, Segment):
        values, start = segment.values, segment.start
    else:
        values = np.asarray(segment)
    if T_total is None:
        T_total = start + len(values)
    n = len(values) - I - O + 1
    if n < 1:
        raise ConfigError(f"segment of length {len(values)} is shorter than I+O={I + O}")
    offsets = np.arange(0, n, stride)
    idx_x = offsets[:, None] + np.arange(I)
    idx_y = offsets[:, None] + I + np.arange(O)
    x = np.transpose(values[idx_x], (0, 2, 1))
    y = np.transpose(values[idx_y], (0, 2, 1))
    return Windows(np.ascontiguousarray(x), np.ascontiguousarray(y), start + offsets, T_total)


@dataclass
class PreparedData:
    train: Windows
    val: Windows
    test: Windows
    normalizer: Normalizer
    names: list[str]
    T_total: int

    @property
    def C(self) -> int:
        return len(self.names)

    def split(self, name: str) -> Windows:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def prepare_data(series: RawSeries, I: int, O: int, ratios=(0.7, 0.1, 0.2),  # noqa: E741
                 stride: int = 1, eval_stride: int = 1) -> PreparedData:
    """Split, fit the normalizer on train, and window every segment in normalized units."""
    train, val, test = chrono_split(series.values, ratios, I + O)
    norm = Normalizer.fit(train.values, series.names)
    T = series.T

    def win(seg: Segment, s: int) -> Windows:
        return make_windows(Segment(seg.start, norm.apply(seg.values)), I, O, s, T)

    return PreparedData(win(train, stride), win(val, eval_stride), win(test, eval_stride),
                        norm, list(series.names), T)


# -- baselines ----------------------------------------------------------------

def persistence_forecast(x: np.ndarray, O: int, mode: str = "seasonal") -> np.ndarray:  # noqa: E741
    """Model-free forecast from history (..., C, I).

    ``seasonal`` repeats the last O observed values (tiled if O > I);
    ``last`` repeats the final observation O times.
    """
    x = np.asarray(x)
    if mode == "last":
        return np.repeat(x[..., -1:], O, axis=-1)
    if mode == "seasonal":
        I = x.shape[-1]  # noqa: E741
        if O <= I:
            return x[..., I - O:].copy()
        reps = -(-O // I)
        return np.concatenate([x] * reps, axis=-1)[..., :O]
    raise ValueError(f"unknown persistence mode {mode!r}")


# -- synthetic data -------------------------------------------------------------

@dataclass
class SynthSpec:
    channels: int = 8
    length: int = 4000
    periods: tuple[float, ...] = (24.0, 48.0, 96.0)
    amplitudes: np.ndarray | None = None  # (channels, tones); drawn from seed if None
    phases: np.ndarray | None = None      # (channels, tones); drawn from seed if None
    noise: float = 0.1
    seed: int = 0


def synth_generate(spec: SynthSpec) -> RawSeries:
    """Sum of sine tones per channel plus seeded Gaussian noise.

    Channel c is ``sum_k A[c,k] * sin(2*pi*t/P_k + phi[c,k]) + noise``.
    """
    if any(p < 2 for p in spec.periods):
        raise ConfigError(f"tone periods must be >= 2, got {spec.periods}")
    rng = np.random.default_rng(spec.seed)
    K = len(spec.periods)
    amps = (np.asarray(spec.amplitudes, dtype=float) if spec.amplitudes is not None
            else rng.uniform(0.5, 1.5, size=(spec.channels, K)))
    phases = (np.asarray(spec.phases, dtype=float) if spec.phases is not None
              else rng.uniform(0.0, 2 * np.pi, size=(spec.channels, K)))
    amps = np.broadcast_to(amps, (spec.channels, K))
    phases = np.broadcast_to(phases, (spec.channels, K))
    t = np.arange(spec.length, dtype=float)[:, None]
    values = np.zeros((spec.length, spec.channels))
    for k, period in enumerate(spec.periods):
        values += amps[:, k] * np.sin(2 * np.pi * t / period + phases[:, k])
    if spec.noise > 0:
        values += rng.normal(0.0, spec.noise, size=values.shape)
    names = [f"ch{c}" for c in range(spec.channels)]
    return RawSeries(names, values, [str(i) for i in range(spec.length)])
