"""Rejection rates of the drop and same-law replacement tests on pure-noise columns.

Usage: python3 scripts/importance_calibration.py [--reps 200] [--B 100]
"""
import argparse

from augbagg.rng import derive_seed
from augbagg.tree import TreeConfig
from augbagg.vartest import Combo, Scenario, binomial_acceptance_interval, clopper_pearson, scenario_test


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--B", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lo, hi = binomial_acceptance_interval(args.reps)
    print(f"nominal 0.05; 99% acceptance interval for counts: [{lo}, {hi}]")
    cells = [(0.05, 10, Combo("replace", "same")), (0.05, 100, Combo("replace", "same")),
             (0.71, 10, Combo("replace", "same")), (0.71, 100, Combo("replace", "same")),
             (0.01, 250, Combo("drop"))]
    for k, (snr, q, combo) in enumerate(cells):
        rej = sum(scenario_test(Scenario(snr, q), combo, args.B, TreeConfig(), 0.05,
                                derive_seed(args.seed, k, rep)).reject for rep in range(args.reps))
        ci = clopper_pearson(rej, args.reps)
        print(f"{combo.label:>14} snr={snr:<5} q={q:<4} {rej}/{args.reps} "
              f"({rej / args.reps:.3f}, 95% CI {ci[0]:.3f}-{ci[1]:.3f})", flush=True)


if __name__ == "__main__":
    main()
