"""Ablation grids on the tone dataset: basis kind, loss arms, heads, basis count.

    python scripts/ablation_tables.py --grid basis-kind --seeds 0,1,2 --out results/

Each grid writes ``<out>/ablation_<grid>.csv`` with median MSE/MAE per variant.
Use ``--epochs`` and ``--stride`` to shrink the run for a quick look.
"""

import argparse
import logging
from pathlib import Path

from basisformer.cli import ABLATION_PRESETS
from basisformer.experiments import synth_config, synth_data
from basisformer.trainer import ablation_csv, run_ablation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", default="basis-kind", choices=sorted(ABLATION_PRESETS))
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--stride", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    base = synth_config(0, epochs=args.epochs, stride=args.stride)
    seeds = [int(s) for s in args.seeds.split(",")]
    results = run_ablation(ABLATION_PRESETS[args.grid], base, seeds,
                           lambda seed: synth_data(seed, base))
    table = ablation_csv(results)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"ablation_{args.grid}.csv").write_text(table)
    print(table, end="")


if __name__ == "__main__":
    main()
