"""Generalized laser: correlation map over pump rate w+ and reverse-emission ratio g+/g-.

Writes the sweep CSV and prints the closed-form window edges for each ratio.

    python scripts/twolevel_window_map.py --out results/window_map
"""
import argparse

import numpy as np

from corrsteady import twolevel as tl
from corrsteady.config import from_dict
from corrsteady.sweep import run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/window_map")
    ap.add_argument("--N", type=float, default=1e4)
    ap.add_argument("--w-minus", type=float, default=0.0, help="in units of N gamma")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = from_dict(dict(
        name="window-map", variant="two-level", model=dict(N=args.N, w_minus=args.w_minus * args.N),
        sweep=dict(variable="grid", start=0.02, stop=1.2, points=30, unit="N",
                   start2=0.0, stop2=0.9, points2=10),
        spectrum=dict(enabled=False),
    )).validate()
    rows, failed = run_sweep(cfg, args.out, workers=args.workers)
    print(f"{len(rows)} points, {failed} failed")
    for r in np.linspace(0.0, 0.9, 10):
        b = tl.threshold_bounds(args.N, args.w_minus * args.N, 1.0, r)
        edges = "no window" if b is None else f"{b[0] / args.N:.4f} < w+/N < {b[1] / args.N:.4f}"
        print(f"g+/g- = {r:.1f}: {edges}")


if __name__ == "__main__":
    main()
