"""Table sweeps, rate studies and plot-data emitters.

CSV columns (fixed)::

    problem,method,alpha0,q,r,gamma,xi,seed,khat,rel_error,residual,walltime_ms

``method`` is the sweep label, ``r``/``gamma`` hold the exponent rule of the
sweep (a number, ``nonincreasing`` or ``linear(c)``) and are empty for the
other family.  Floats are written with ``repr`` so files are bit-exact.
``walltime_ms`` is left empty unless timing is requested; timings otherwise
only go to the metadata file.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..filters import FilterSpec, filter_gain, one_minus_filter
from ..iterate import StopReport, noise_amplification, run_iteration
from ..oracle import MAX_COLS, dense_nsift_run, dense_nsiwt_run, max_relative_deviation
from ..problems import Problem, make_problem
from ..spectral import SourceCondition, SpectralOperator, make_source_solution
from ..stopping import NoiseModel, RateFit, StopRule, add_noise, rate_fit
from .config import ExperimentConfig, GridPoint

CSV_HEADER = ("problem", "method", "alpha0", "q", "r", "gamma", "xi", "seed",
              "khat", "rel_error", "residual", "walltime_ms")

# smaller instances used by --verify when the configured one exceeds the oracle cap
VERIFY_PROXIES = {"foxgood": "foxgood:n=64", "deriv2": "deriv2:n=128",
                  "blur": "blur:side=16,band=6,sigma2=2"}
VERIFY_TOL = 1e-6
# both paths drop sigma < VERIFY_CUTOFF * sigma_1 during --verify; below it the
# Gram eigenvalues of the dense oracle are too inaccurate to serve as a reference
VERIFY_CUTOFF = 1e-5


class NumericalFailure(RuntimeError):
    pass


@dataclass(eq=False)
class ExperimentRecord:
    problem: str
    method: str
    alpha0: float | None
    q: float | None
    r: str
    gamma: str
    xi: float
    seed: int
    khat: int
    rel_error: float
    residual: float
    walltime_ms: float
    converged: bool = True
    reason: str = ""
    flagged: bool = False
    error: float = math.nan
    noise_free_error: float = math.nan
    perturbation_bound: float = math.nan
    kind: str = ""
    x: np.ndarray | None = field(default=None, repr=False)
    history: tuple = field(default=(), repr=False)

    def csv_row(self, with_timing: bool):
        def fmt(v):
            return "" if v is None else repr(float(v))
        return [self.problem, self.method, fmt(self.alpha0), fmt(self.q), self.r,
                self.gamma, fmt(self.xi), str(self.seed), str(self.khat),
                repr(self.rel_error), repr(self.residual),
                f"{self.walltime_ms:.3f}" if with_timing else ""]


@dataclass
class TableResult:
    config: ExperimentConfig
    records: list
    metadata: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in self.records:
            w.writerow(rec.csv_row(self.config.record_timing))
        return buf.getvalue()

    def write(self, out_dir=None) -> tuple[Path, Path]:
        out = Path(out_dir or self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.config.name}.csv"
        meta_path = out / f"{self.config.name}.meta.json"
        csv_path.write_text(self.csv_text())
        meta_path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path


def _abs_error(op: SpectralOperator, coeffs, truth) -> float:
    tv = op.coefficients(truth)
    return float(math.hypot(np.linalg.norm(coeffs - tv.coeffs), tv.perp))


def _run_point(problem: Problem, op: SpectralOperator, cfg: ExperimentConfig, pt: GridPoint,
               yd, delta, stop: StopRule) -> ExperimentRecord:
    sched = pt.schedule.in_units(op.norm_scale, pt.method, cfg.alpha_units)
    t0 = time.perf_counter()
    state, rep = run_iteration(op, sched, pt.method, yd, stop, truth=problem.x_true,
                               allow_nonregularizing=pt.allow_nonregularizing)
    wall = 1e3 * (time.perf_counter() - t0)
    if not (np.all(np.isfinite(state.coeffs)) and math.isfinite(rep.residual)):
        raise NumericalFailure(f"non-finite iterate for {pt.label} {sched.label}")
    # noise-free companion run with the same number of steps
    clean, _ = run_iteration(op, replace(sched, max_iter=rep.khat), pt.method, problem.y,
                             StopRule.max_only(None),
                             allow_nonregularizing=pt.allow_nonregularizing)
    amp = noise_amplification(sched, pt.method, rep.khat)
    gamma_vals = sched.exponent.values(rep.khat)
    flagged = pt.method == "nsift" and bool(np.any(gamma_vals < 0.5))
    return ExperimentRecord(
        problem=cfg.problem, method=pt.label, alpha0=pt.alpha0, q=pt.q, r=pt.r,
        gamma=pt.gamma, xi=cfg.xi, seed=cfg.seed, khat=rep.khat,
        rel_error=float(rep.rel_error), residual=float(rep.residual), walltime_ms=wall,
        converged=rep.converged, reason=rep.reason, flagged=flagged,
        error=_abs_error(op, state.coeffs, problem.x_true),
        noise_free_error=_abs_error(op, clean.coeffs, problem.x_true),
        perturbation_bound=delta / op.norm_scale * amp,
        kind=pt.method, x=op.synthesize(state.coeffs), history=state.history)


def _degeneracy_gap(records, grid) -> float | None:
    """Largest gap between NSIWT r=1 and NSIFT gamma=1 cells with equal alphas."""
    by_key = {}
    for rec, pt in zip(records, grid):
        if pt.exponent_label == "1":
            by_key.setdefault((pt.schedule.alpha, pt.schedule.max_iter), {})[pt.method] = rec
    gaps = [abs(d["nsiwt"].rel_error - d["nsift"].rel_error) for d in by_key.values()
            if len(d) == 2]
    return max(gaps) if gaps else None


def dense_condition(sched, method: str, n: int) -> float:
    """Largest condition number of the dense step matrices over ``n`` steps.

    On the normalized scale ``||W|| = 1`` and the truncated modes enter the
    dense systems with eigenvalue 0, so step ``k`` has condition
    ``(1 + a_k) / a_k`` (NSIWT) or ``((1 + a_k) / a_k)^g_k`` (NSIFT).
    """
    a, e = sched.sequences(n, method, allow_nonregularizing=True)
    logs = np.log1p(1.0 / a)
    if method == "nsift":
        logs = e * logs
    return float(np.exp(min(float(np.max(logs)), 700.0)))


def verify_table(cfg: ExperimentConfig, problem: Problem | None = None) -> dict:
    """Run every grid point through the dense oracle.

    Uses the configured problem when it has at most ``MAX_COLS`` unknowns and
    its ``VERIFY_PROXIES`` stand-in otherwise.  Both paths see the same
    noisy data, schedule and number of steps, and both drop modes below
    ``VERIFY_CUTOFF``.  Points whose dense systems are too ill-conditioned to
    be a reference at ``VERIFY_TOL`` (``cond * eps > VERIFY_TOL``) and
    ``gamma < 1/2`` points are listed as skipped instead of compared.
    """
    spec = cfg.problem
    if problem is None:
        problem = make_problem(spec)
    if problem.n_cols > MAX_COLS:
        spec = VERIFY_PROXIES[spec.partition(":")[0]]
        problem = make_problem(spec)
    if problem.matrix is None:
        raise ValueError("verification needs an explicit matrix")
    cutoff = max(cfg.cutoff, VERIFY_CUTOFF)
    op = problem.operator_at(cutoff)
    yd, delta = add_noise(problem.y, NoiseModel(cfg.xi, cfg.seed))
    stop = (StopRule.discrepancy(delta, cfg.tau) if cfg.stop_rule == "discrepancy"
            else StopRule.max_only(None))
    eps = np.finfo(float).eps
    worst, checked, skipped = 0.0, 0, []
    for i, pt in enumerate(cfg.grid()):
        gammas = pt.schedule.exponent.values(pt.schedule.max_iter)
        if pt.method == "nsift" and np.any(gammas < 0.5):
            skipped.append({"row": i, "reason": "gamma < 1/2"})
            continue
        sched = pt.schedule.in_units(op.norm_scale, pt.method, cfg.alpha_units)
        state, rep = run_iteration(op, sched, pt.method, yd, stop)
        cond = dense_condition(sched, pt.method, rep.khat)
        if cond * eps > VERIFY_TOL:
            skipped.append({"row": i, "reason": f"dense condition {cond:.1e}"})
            continue
        sched_n = replace(sched, max_iter=rep.khat)
        dense = dense_nsiwt_run if pt.method == "nsiwt" else dense_nsift_run
        xd = dense(problem.matrix, yd, sched_n, rep.khat, rel_cutoff=cutoff)
        worst = max(worst, max_relative_deviation(op.synthesize(state.coeffs), xd))
        checked += 1
    return {"problem": spec, "max_rel_deviation": worst, "checked": checked,
            "skipped": skipped, "cutoff": cutoff, "tolerance": VERIFY_TOL}


def run_table(cfg: ExperimentConfig, verify: bool = False, jobs: int = 1) -> TableResult:
    """Evaluate every grid point of ``cfg`` on one shared noisy data vector."""
    cfg.validate()
    grid = cfg.grid()
    problem = make_problem(cfg.problem)
    t0 = time.perf_counter()
    op = problem.operator_at(cfg.cutoff)
    t_svd = time.perf_counter() - t0
    yd, delta = add_noise(problem.y, NoiseModel(cfg.xi, cfg.seed))
    stop = (StopRule.discrepancy(delta, cfg.tau) if cfg.stop_rule == "discrepancy"
            else StopRule.max_only(None))

    def work(pt):
        return _run_point(problem, op, cfg, pt, yd, delta, stop)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            records = list(pool.map(work, grid))  # map keeps grid order
    else:
        records = [work(pt) for pt in grid]

    slack = [rec.noise_free_error + rec.perturbation_bound + 1e-8 - rec.error
             for rec in records if not rec.flagged]
    meta = {
        "version": __version__,
        "experiment": cfg.name,
        "problem": cfg.problem,
        "problem_meta": {k: v for k, v in problem.meta.items() if v is not None},
        "seed": cfg.seed,
        "rng": "numpy PCG64 + Generator.standard_normal",
        "xi": cfg.xi,
        "delta": delta,
        "tau": cfg.tau,
        "norm_scale": op.norm_scale,
        "rank": op.rank,
        "cutoff": cfg.cutoff,
        "alpha_units": cfg.alpha_units,
        "records": len(records),
        "nonregularizing_rows": [i for i, r in enumerate(records) if r.flagged],
        "unconverged_rows": [i for i, r in enumerate(records) if not r.converged],
        "perturbation_bound_violations": int(sum(s < 0 for s in slack)),
        "degeneracy_max_gap": _degeneracy_gap(records, grid),
        "walltime_ms": {"svd": 1e3 * t_svd,
                        "rows": [round(r.walltime_ms, 3) for r in records]},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if verify:
        meta["verify"] = verify_table(cfg, problem)
    return TableResult(cfg, records, meta)


# -- rate studies ---------------------------------------------------------------

@dataclass
class RateReport:
    method: str
    nu: float
    nu_effective: float
    deltas: np.ndarray
    errors: np.ndarray
    alphas: np.ndarray
    fit: RateFit
    expected: float

    def lines(self):
        yield f"# {self.method}  nu={self.nu:g}  nu_eff={self.nu_effective:g}"
        yield "delta,alpha,error"
        for d, a, e in zip(self.deltas, self.alphas, self.errors):
            yield f"{d!r},{a!r},{e!r}"
        yield (f"# slope={self.fit.slope:.4f}  expected={self.expected:.4f}  "
               f"r2={self.fit.r_squared:.5f}")


def parse_filter(text: str) -> FilterSpec:
    """``siwt:r=1,n=3`` style text -> ``FilterSpec`` (with alpha = 1)."""
    fam, _, rest = text.partition(":")
    kw = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        key = {"n": "n_iter"}.get(key.strip(), key.strip())
        if key not in ("r", "gamma", "n_iter"):
            raise ValueError(f"unknown filter parameter {key!r}")
        kw[key] = int(val) if key == "n_iter" else float(val)
    return FilterSpec(fam, 1.0, **kw)


def source_truth(op: SpectralOperator, nu: float, rho: float = 1.0) -> np.ndarray:
    """``(K^T K)^(nu/2) w`` with ``w`` flat over the modes and ``||w|| = rho``."""
    w = np.full(op.rank, rho / math.sqrt(op.rank))
    return make_source_solution(op, SourceCondition(nu, rho), w)


def run_rate_study(problem: Problem | str, spec: FilterSpec | str, nu: float, deltas,
                   window: float = 4.0, n_alpha: int = 161) -> RateReport:
    """Error-versus-noise study with a planted source solution.

    For each ``delta`` the data error is the single-mode perturbation of norm
    ``delta`` that maximizes the filter gain, signed so that it adds to the
    bias.  The error is minimized over ``n_alpha`` log-spaced alphas within
    ``window`` decades of the a-priori choice
    ``delta^(1 / (beta (nu_eff + 1)))``, and the log-log slope is fitted.
    """
    if isinstance(problem, str):
        problem = make_problem(problem)
    if isinstance(spec, str):
        spec = parse_filter(spec)
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or deltas.size < 4:
        raise ValueError("need at least 4 noise levels")
    if math.log10(deltas.max() / deltas.min()) < 3:
        raise ValueError("noise levels must span at least 3 decades")
    op = problem.operator
    xt = op.coefficients(source_truth(op, nu)).coeffs
    nu_eff = min(nu, spec.qualification)
    errors, best_alphas = [], []
    for d in deltas:
        a_star = d ** (1.0 / (spec.beta * (nu_eff + 1.0)))
        best, best_a = np.inf, a_star
        for a in a_star * np.logspace(-window, window, n_alpha):
            s = spec.with_alpha(a)
            bias = -one_minus_filter(s, op.sigma) * xt
            gain = filter_gain(s, op.sigma)
            j = int(np.argmax(gain))
            err = bias.copy()
            err[j] += math.copysign(d * gain[j], bias[j] if bias[j] != 0 else 1.0)
            e = float(np.linalg.norm(err))
            if e < best:
                best, best_a = e, a
        errors.append(best)
        best_alphas.append(best_a)
    errors = np.array(errors)
    fit = rate_fit(np.column_stack([deltas, errors]))
    fam, _, params = spec.label.partition(":")
    name = ":".join(filter(None, [fam, params.partition(",")[2]]))
    return RateReport(name, nu, nu_eff, deltas, errors, np.array(best_alphas), fit,
                      nu_eff / (nu_eff + 1.0))


# -- plot data --------------------------------------------------------------------

def write_pgm(path, image, vmax: float) -> Path:
    """8-bit binary graymap; values clamped to ``[0, vmax]``."""
    img = np.clip(np.asarray(image, dtype=float), 0.0, vmax)
    data = np.round(255.0 * img / vmax).astype(np.uint8) if vmax > 0 else \
        np.zeros(img.shape, dtype=np.uint8)
    path = Path(path)
    h, w = data.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def emit_curves(problem: Problem, records, out_dir, stem: str) -> list:
    """Reconstruction overlays for ``records`` (each carrying ``x``).

    1-D problems give one whitespace-separated text file with columns
    ``t truth rec_1 ... rec_k``; blur problems give one graymap per record
    plus one for the truth.
    """
    records = list(records)
    if not records or any(r.x is None for r in records):
        raise ValueError("records must carry reconstructions")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if problem.name == "blur":
        side = problem.meta["side"]
        vmax = float(problem.x_true.max())
        paths = [write_pgm(out / f"{stem}_truth.pgm",
                           problem.x_true.reshape(side, side, order="F"), vmax)]
        for rec in records:
            tag = rec.method.lower().replace(" ", "_")
            paths.append(write_pgm(out / f"{stem}_{tag}.pgm",
                                   rec.x.reshape(side, side, order="F"), vmax))
        return paths
    n = problem.n_cols
    t = (np.arange(1, n + 1) - 0.5) / n
    cols = [t, problem.x_true] + [r.x for r in records]
    names = ["t", "truth"] + [r.method.replace(" ", "_") for r in records]
    path = out / f"{stem}.dat"
    with open(path, "w") as fh:
        fh.write(" ".join(names) + "\n")
        for row in np.column_stack(cols):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return [path]
