"""Distance between the augmented min-norm estimator and ridge as the noise count grows.

Usage: python3 scripts/ridge_convergence.py [--seeds 20] [--lam 1.0]
"""
import argparse

import numpy as np

from augbagg.linear import augmented_minnorm, ridge
from augbagg.rng import rng


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--p", type=int, default=5)
    args = ap.parse_args()

    g = rng(0, "design")
    X, y = g.standard_normal((args.n, args.p)), g.standard_normal(args.n)
    target = ridge(X, y, args.lam).coefficients
    print("q,median_rel_distance,max_rel_distance")
    for q in (10, 100, 1000, 10_000, 100_000):
        d = [np.linalg.norm(augmented_minnorm(X, y, q, args.lam, True, s).coefficients - target)
             / np.linalg.norm(target) for s in range(args.seeds)]
        print(f"{q},{np.median(d):.6f},{np.max(d):.6f}")


if __name__ == "__main__":
    main()
