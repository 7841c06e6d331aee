"""Reconstruction overlays for the unbounded-exponent configs.

Writes ``<out>/deriv2.dat`` (columns t, truth, one per method) and graymaps
for the blur image, then prints the error near the deriv2 corner at t = 1/2.

    python scripts/curves.py [--out curves]
"""
import argparse
from pathlib import Path

import numpy as np

from itertik.bench.config import load_config
from itertik.bench.runner import emit_curves, run_table
from itertik.problems import make_problem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", default="curves")
    args = p.parse_args()
    for name, stem in (("table4_deriv2_unbounded", "deriv2"), ("table6_blur_unbounded", "blur")):
        cfg = load_config(CONFIGS / f"{name}.toml")
        res = run_table(cfg)
        prob = make_problem(cfg.problem)
        paths = emit_curves(prob, res.records, args.out, stem)
        for path in paths:
            print(path)
        if stem == "deriv2":
            mid = prob.n_cols // 2
            corner = slice(mid - 1, mid + 1)
            for rec in res.records:
                err = np.abs(rec.x[corner] - prob.x_true[corner]).max()
                print(f"  {rec.method:<6} corner error {err:.5f}  rel error {rec.rel_error:.5f}")


if __name__ == "__main__":
    main()
