"""``bench`` command line.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 ``--verify`` deviation above tolerance.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from ..iterate import ParamSchedule, ScheduleError, parse_alpha_rule, parse_method, \
    schedule_diagnostics
from ..problems import ProblemError
from .config import ConfigError, apply_overrides, load_config
from .runner import VERIFY_TOL, NumericalFailure, run_rate_study, run_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


def parse_deltas(text: str) -> np.ndarray:
    """``hi:lo:count`` (log-spaced, hi first) or a comma separated list."""
    if ":" in text:
        hi, lo, count = text.split(":")
        return np.logspace(np.log10(float(hi)), np.log10(float(lo)), int(count))
    return np.array([float(v) for v in text.split(",")])


def _build_parser():
    p = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a table config")
    run.add_argument("--config", required=True)
    run.add_argument("--verify", action="store_true", help="cross-check against the dense oracle")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    rate = sub.add_parser("rate", help="fitted convergence rate under a source condition")
    rate.add_argument("--problem", default="diag:m=801,smin=1e-8")
    rate.add_argument("--method", required=True, help="e.g. siwt:r=1,n=3")
    rate.add_argument("--nu", type=float, required=True)
    rate.add_argument("--deltas", default="1e-2:1e-6:12")

    diag = sub.add_parser("diag", help="convergence-series diagnostics of a schedule")
    diag.add_argument("--schedule", required=True, help="e.g. geometric:a0=0.01,q=0.7")
    diag.add_argument("--method", required=True, help="e.g. nsiwt:r=0.6")
    diag.add_argument("--horizon", type=int, default=200)
    diag.add_argument("--sigma", default="1,0.5,0.1,0.01")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    over = list(args.set)
    if args.seed is not None:
        over.append(f"experiment.seed={args.seed}")
    if args.out is not None:
        over.append(f"experiment.out={args.out}")
    cfg = apply_overrides(cfg, over)
    result = run_table(cfg, verify=args.verify, jobs=args.jobs)
    csv_path, meta_path = result.write()
    print(f"wrote {csv_path} ({len(result.records)} rows) and {meta_path}")
    if args.verify:
        ver = result.metadata["verify"]
        dev = ver["max_rel_deviation"]
        print(f"verify on {ver['problem']}: max relative deviation {dev:.3e} over "
              f"{ver['checked']} points ({len(ver['skipped'])} skipped)")
        if not dev <= VERIFY_TOL:
            return EXIT_VERIFY
    return EXIT_OK


def _cmd_rate(args) -> int:
    report = run_rate_study(args.problem, args.method, args.nu, parse_deltas(args.deltas))
    for line in report.lines():
        print(line)
    return EXIT_OK


def _cmd_diag(args) -> int:
    method, expo = parse_method(args.method)
    sched = ParamSchedule(parse_alpha_rule(args.schedule), expo)
    probes = [float(s) for s in args.sigma.split(",")]
    rep = schedule_diagnostics(sched, method, probes, args.horizon)
    print(f"{method} {rep.schedule}  horizon={args.horizon}")
    print("sigma,partial_half,partial_full,growth_ratio")
    for s, h, f, g in zip(rep.sigma_probes, rep.partial_half, rep.partial_full, rep.growth_ratio):
        print(f"{s:g},{h:.6g},{f:.6g},{g:.6g}")
    print(f"beta={rep.beta:.6g}  beta_tilde={rep.beta_tilde:.6g}  clamped={rep.clamped}")
    print(f"verdict: {rep.verdict} ({rep.reason})")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "rate": _cmd_rate, "diag": _cmd_diag}[args.command]
    try:
        return handler(args)
    except (ConfigError, ProblemError, ScheduleError, ValueError) as exc:
        print(f"bench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"bench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
