"""Run every shipped table config and write CSV + metadata under ``results/``.

    python scripts/run_tables.py [--only deriv2] [--out results] [--verify]
"""
import argparse
from pathlib import Path

from itertik.bench.config import load_config
from itertik.bench.runner import run_table

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--only", default="", help="substring filter on config names")
    p.add_argument("--out", default="results")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    for path in sorted(CONFIGS.glob("*.toml")):
        if args.only not in path.stem:
            continue
        res = run_table(load_config(path), verify=args.verify, jobs=args.jobs)
        csv_path, _ = res.write(args.out)
        best = min(res.records, key=lambda r: r.rel_error)
        print(f"{path.stem}: {len(res.records)} rows, best {best.method} "
              f"{best.rel_error:.5f} (k={best.khat}) -> {csv_path}")
        if args.verify:
            print(f"  oracle deviation {res.metadata['verify']['max_rel_deviation']:.2e}")


if __name__ == "__main__":
    main()
