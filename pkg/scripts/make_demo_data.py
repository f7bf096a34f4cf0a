"""Write a small tabular regression CSV (mixed numeric/categorical) for realdata-rte.

Usage: python3 scripts/make_demo_data.py [out.csv] [--n 300] [--seed 0]
"""
import argparse
import csv
from pathlib import Path

import numpy as np


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default=str(Path(__file__).resolve().parents[1] / "data" / "demo.csv"))
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    g = np.random.default_rng(args.seed)
    n = args.n
    x = g.standard_normal((n, 4))
    region = g.choice(["north", "south", "west"], size=n)
    shift = np.select([region == "north", region == "south"], [0.5, -0.5], 0.0)
    y = np.sin(2 * x[:, 0]) + x[:, 1] * x[:, 2] + 0.5 * x[:, 3] + shift + g.standard_normal(n)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "x3", "x4", "region", "y"])
        for i in range(n):
            w.writerow([*(f"{v:.6f}" for v in x[i]), region[i], f"{y[i]:.6f}"])
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
