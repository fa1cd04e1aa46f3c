"""Command line entry point: train, eval, predict, ablate, export-basis.

Configuration precedence, lowest to highest: built-in defaults, the flat JSON
file given by ``--config``, then explicit flags. Every command resolves and
validates its whole configuration (and loads its data) before writing anything.

Output layout under ``--out``::

    config.json        resolved config echo
    report.csv         per-epoch losses (deterministic)
    timings.csv        per-epoch wall-clock seconds
    checkpoint.bfck    best-validation parameters + normalizer
    predictions/       eval metrics and predict forecasts
    basis-export/      exported basis CSVs
    ablation.csv       ablate summary (ablation_runs.csv has every run)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .basisnet import write_basis_csv
from .config import LOSS_ARMS, ConfigError, ModelConfig, load_config_file
from .datapipe import DataError, SynthSpec, load_csv, prepare_data, synth_generate
from .diffcore import DimensionError
from .model import BasisFormer
from .trainer import (
    CheckpointError, VariantResult, ablation_csv, evaluate, load_checkpoint, run_ablation,
    train,
)

log = logging.getLogger("basisformer")

CHECKPOINT_NAME = "checkpoint.bfck"

# flag name -> ModelConfig field
CONFIG_FLAGS = {
    "seed": ("seed", int), "epochs": ("epochs", int), "patience": ("patience", int),
    "N": ("N", int), "H": ("H", int), "M": ("M", int), "Dc": ("D_c", int),
    "bottleneck": ("bottleneck", int), "epsilon": ("epsilon", float),
    "w_pred": ("w_pred", float), "w_align": ("w_align", float), "w_smooth": ("w_smooth", float),
    "basis_kind": ("basis_kind", str), "I": ("I", int), "O": ("O", int),
    "stride": ("stride", int), "batch": ("batch", int), "lr": ("lr", float),
    "dtype": ("dtype", str), "basis_hidden": ("basis_hidden", int),
    "activation": ("activation", str),
}

# keys in a config file that describe the dataset rather than the model
DATA_KEYS = ("data", "synth_channels", "synth_length", "synth_noise", "synth_seed", "synth_periods")

ABLATION_PRESETS = {
    "basis-kind": {k: {"basis_kind": k} for k in ("learnable", "fixed-sine-grid", "random-sine")},
    "loss-arms": {k: v for k, v in LOSS_ARMS.items()},
    "heads": {f"H={h}": {"H": h} for h in (4, 8, 16, 32)},
    "N": {f"N={n}": {"N": n} for n in (1, 5, 10, 15, 20)},
}


class UsageError(Exception):
    pass


# -- argument parsing -----------------------------------------------------------

def _split_arg(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--split needs three comma-separated ratios")
    return tuple(parts)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model/training config (override --config)")
    g.add_argument("--config", help="flat JSON file of config keys")
    for flag, (_, typ) in CONFIG_FLAGS.items():
        g.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ, default=None)
    g.add_argument("--split", type=_split_arg, default=None, help="train,val,test ratios")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", default=None, help="CSV path, or 'synth' for the synthetic tones")
    g.add_argument("--synth-channels", type=int, default=None)
    g.add_argument("--synth-length", type=int, default=None)
    g.add_argument("--synth-noise", type=float, default=None)
    g.add_argument("--synth-seed", type=int, default=None, help="defaults to --seed")
    g.add_argument("--synth-periods", default=None, help="comma-separated tone periods")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="basisformer",
                                     description="BasisFormer forecasting on numpy.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write report + checkpoint")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", default="runs/train")

    p = sub.add_parser("eval", help="score a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    _add_data_flags(p)
    p.add_argument("--split-name", dest="split_name", default="test",
                   choices=("train", "val", "test"))
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict", help="forecast O steps from a history CSV of I rows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history", required=True)
    when = p.add_mutually_exclusive_group()
    when.add_argument("--t", type=int, default=None, help="absolute index of the first history row")
    when.add_argument("--tau", type=float, default=None, help="normalized timestamp in [0, 1)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("ablate", help="train a grid of variants over several seeds")
    _add_data_flags(p)
    _add_config_flags(p)
    p.add_argument("--grid", required=True,
                   help=f"preset ({', '.join(ABLATION_PRESETS)}) or JSON file {{name: overrides}}")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out", default="runs/ablate")

    p = sub.add_parser("export-basis", help="write the N x (I+O) basis at one timestamp")
    p.add_argument("--checkpoint", required=True)
    when = p.add_mutually_exclusive_group()
    when.add_argument("--t", type=int, default=None)
    when.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--out", default=None)
    return parser


# -- resolution -----------------------------------------------------------------

def resolve_config(args: argparse.Namespace) -> tuple[ModelConfig, dict]:
    """Merge defaults, config file and flags. Returns (unvalidated config, data options)."""
    values: dict = {}
    data_opts: dict = {}
    if getattr(args, "config", None):
        raw = load_config_file(args.config)
        for key in DATA_KEYS:
            if key in raw:
                data_opts[key] = raw.pop(key)
        values.update(raw)
    for flag, (name, _) in CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if getattr(args, "split", None) is not None:
        values["split"] = args.split
    for key in DATA_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            data_opts[key] = v
    try:
        cfg = ModelConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return cfg, data_opts


def load_series(data_opts: dict, seed: int):
    source = data_opts.get("data", "synth")
    if source == "synth":
        periods = data_opts.get("synth_periods", (24.0, 48.0, 96.0))
        if isinstance(periods, str):
            periods = tuple(float(p) for p in periods.split(","))
        spec = SynthSpec(channels=int(data_opts.get("synth_channels", 8)),
                         length=int(data_opts.get("synth_length", 4000)),
                         periods=tuple(float(p) for p in periods),
                         noise=float(data_opts.get("synth_noise", 0.1)),
                         seed=int(data_opts.get("synth_seed", seed)))
        return synth_generate(spec)
    return load_csv(source)


def prepare(cfg: ModelConfig, data_opts: dict):
    """Load data, set C from it, validate everything. No side effects."""
    try:
        errs = cfg.errors()
    except TypeError as exc:
        raise ConfigError(f"bad config value type: {exc}") from None
    if errs:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errs))
    series = load_series(data_opts, cfg.seed)
    cfg = cfg.replace(C=series.C).validate()
    data = prepare_data(series, cfg.I, cfg.O, cfg.split, cfg.stride, cfg.eval_stride)
    return cfg, data


def _out_dir(path: str | None, default: Path) -> Path:
    out = Path(path) if path else default
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metrics(path: Path, split: str, m: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "mse", "mae"])
        w.writerow([split, repr(m["mse"]), repr(m["mae"])])


# -- commands -------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg, data_opts = resolve_config(args)
    cfg, data = prepare(cfg, data_opts)
    model = BasisFormer(cfg)

    out = _out_dir(args.out, Path("runs/train"))
    (out / "config.json").write_text(cfg.to_json() + "\n")
    ckpt = out / CHECKPOINT_NAME
    report = train(model, data, cfg, checkpoint_path=ckpt)
    (out / "report.csv").write_text(report.to_csv())
    (out / "timings.csv").write_text(report.timings_csv())
    if not report.epochs:
        log.error("training aborted before the first epoch finished: %s", report.stop_reason)
        return 1
    m = evaluate(model, data.test, data.normalizer)
    (out / "predictions").mkdir(exist_ok=True)
    _write_metrics(out / "predictions" / "metrics_test.csv", "test", m)
    print(f"best epoch {report.best_epoch} (val_pred={report.best_val:.6g}); "
          f"test mse={m['mse']:.6g} mae={m['mae']:.6g}; {report.stop_reason}")
    return 1 if report.stop_reason.startswith("non-finite") else 0


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    cfg = ck.model.cfg
    data_opts = {k: getattr(args, k) for k in DATA_KEYS if getattr(args, k, None) is not None}
    series = load_series(data_opts, cfg.seed)
    if series.C != cfg.C:
        raise ConfigError(f"data has C={series.C} channels but the checkpoint expects C={cfg.C}")
    data = prepare_data(series, cfg.I, cfg.O, cfg.split, cfg.stride, cfg.eval_stride)
    m = evaluate(ck.model, data.split(args.split_name), data.normalizer)
    out = _out_dir(args.out, Path(args.checkpoint).parent) / "predictions"
    out.mkdir(exist_ok=True)
    _write_metrics(out / f"metrics_{args.split_name}.csv", args.split_name, m)
    print(f"{args.split_name}: mse={m['mse']:.6g} mae={m['mae']:.6g}")
    return 0


def _tau(args, T_total: int | None, I: int) -> float:  # noqa: E741
    if args.tau is not None:
        tau = args.tau
    else:
        if T_total is None:
            raise UsageError("checkpoint has no series length; pass --tau")
        # by default the history is taken to be the last I rows of the training series
        t = args.t if args.t is not None else T_total - I
        tau = t / T_total
    if not 0.0 <= tau < 1.0:
        raise UsageError(f"tau must lie in [0, 1), got {tau}")
    return tau


def cmd_predict(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    cfg = ck.model.cfg
    hist = load_csv(args.history)
    if hist.T != cfg.I or hist.C != cfg.C:
        raise DataError(f"history must have exactly I={cfg.I} rows and C={cfg.C} channels, "
                        f"got {hist.T} rows and {hist.C} channels")
    if ck.normalizer is None:
        raise CheckpointError(f"{args.checkpoint}: no normalizer stored; cannot map units")
    tau = _tau(args, ck.T_total, cfg.I)
    x = ck.normalizer.apply_cf(hist.values.T)
    forecast = ck.normalizer.invert_cf(ck.model.predict(x, tau))
    out = _out_dir(args.out, Path(args.checkpoint).parent) / "predictions"
    out.mkdir(exist_ok=True)
    path = out / "forecast.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "tau"] + [f"h{k + 1}" for k in range(cfg.O)])
        for name, row in zip(hist.names, forecast):
            w.writerow([name, repr(tau)] + [repr(float(v)) for v in row])
    print(f"wrote {cfg.C}x{cfg.O} forecast at tau={tau} to {path}")
    return 0


def _load_grid(name: str) -> dict:
    if name in ABLATION_PRESETS:
        return ABLATION_PRESETS[name]
    path = Path(name)
    if not path.exists():
        raise UsageError(f"--grid {name!r} is neither a preset ({', '.join(ABLATION_PRESETS)}) "
                         "nor a file")
    grid = json.loads(path.read_text())
    if not isinstance(grid, dict) or not all(isinstance(v, dict) for v in grid.values()):
        raise ConfigError(f"{path}: grid must map variant names to override objects")
    return grid


def cmd_ablate(args) -> int:
    cfg, data_opts = resolve_config(args)
    grid = _load_grid(args.grid)
    try:
        seeds = [int(s) for s in args.seeds.split(",")]
    except ValueError:
        raise UsageError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
    cfg, _ = prepare(cfg, data_opts)
    # every variant config is checked up front; invalid ones are still recorded as failed runs
    for name, overrides in grid.items():
        try:
            cfg.replace(**overrides).validate()
        except (ConfigError, TypeError) as exc:
            log.warning("variant %s will fail: %s", name, exc)

    def data_for(seed: int):
        return prepare(cfg.replace(seed=seed), data_opts)[1]

    out = _out_dir(args.out, Path("runs/ablate"))
    (out / "config.json").write_text(cfg.to_json() + "\n")
    runs_path = out / "ablation_runs.csv"
    with open(runs_path, "w", newline="") as fh:
        fh.write("variant,seed,mse,mae,best_epoch,error\n")

    def record(r: VariantResult) -> None:
        with open(runs_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                [r.variant, r.seed, repr(r.mse), repr(r.mae), r.best_epoch, r.error])

    results = run_ablation(grid, cfg, seeds, data_for, on_result=record)
    table = ablation_csv(results)
    (out / "ablation.csv").write_text(table)
    print(table, end="")
    return 0


def cmd_export_basis(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    cfg = ck.model.cfg
    if args.t is not None:
        if ck.T_total is None:
            raise UsageError("checkpoint has no series length; pass --tau")
        tau = args.t / ck.T_total
    else:
        tau = args.tau
    if not 0.0 <= tau < 1.0:
        raise UsageError(f"tau must lie in [0, 1), got {tau}")
    out = _out_dir(args.out, Path(args.checkpoint).parent) / "basis-export"
    out.mkdir(exist_ok=True)
    z = ck.model.generate_basis(tau).data
    path = out / f"basis_tau{tau:.6f}.csv"
    write_basis_csv(z, path, cfg.I)
    print(f"wrote {cfg.N}x{cfg.I + cfg.O} basis to {path}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "ablate": cmd_ablate, "export-basis": cmd_export_basis}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except (DataError, DimensionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
    except (CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
