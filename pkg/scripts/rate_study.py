"""Fitted error-versus-noise slopes for the saturation comparison.

    python scripts/rate_study.py [--problem diag:m=801,smin=1e-8]
"""
import argparse

import numpy as np

from itertik.bench.runner import run_rate_study

CASES = [("tikhonov", 4.0), ("weighted:r=3", 4.0), ("siwt:r=1,n=3", 6.0),
         ("sift:gamma=0.5,n=2", 4.0), ("tikhonov", 1.0)]


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--problem", default="diag:m=801,smin=1e-8")
    p.add_argument("--points", type=int, default=12)
    args = p.parse_args()
    deltas = np.logspace(-2, -6, args.points)
    print(f"{'method':<22}{'nu':>5}{'slope':>9}{'expected':>10}{'r2':>10}")
    for method, nu in CASES:
        rep = run_rate_study(args.problem, method, nu, deltas)
        print(f"{method:<22}{nu:>5g}{rep.fit.slope:>9.3f}{rep.expected:>10.3f}"
              f"{rep.fit.r_squared:>10.5f}")


if __name__ == "__main__":
    main()
