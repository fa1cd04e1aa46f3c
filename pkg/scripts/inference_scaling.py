"""Median single-window forecast time as the horizon grows, lookback fixed at 96.

    python scripts/inference_scaling.py --horizons 96,192,336,720
"""

import argparse

from basisformer.experiments import inference_seconds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizons", default="96,192,336,720")
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()
    horizons = [int(h) for h in args.horizons.split(",")]
    base = None
    print("O,median_ms,ratio")
    for O in horizons:  # noqa: E741
        t = inference_seconds(O, repeats=args.repeats)
        base = base or t
        print(f"{O},{1e3 * t:.3f},{t / base:.2f}")


if __name__ == "__main__":
    main()
