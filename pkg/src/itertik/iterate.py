"""Stationary and nonstationary iterated weighted / fractional Tikhonov.

Everything runs per singular component.  One NSIWT step with ``(alpha, r)``
and one NSIFT step with ``(alpha, gamma)`` both have the form

    x_n[m] = F_n(sigma_m) / sigma_m * y[m] + (1 - F_n(sigma_m)) * x_{n-1}[m]

with ``F_n`` the weighted resp. fractional one-step filter, so the noise-free
error of mode ``m`` after ``n`` steps is ``prod_k (1 - F_k(sigma_m))`` times
the exact coefficient.  Constant schedules reproduce the closed-form SIWT and
SIFT filters of :mod:`itertik.filters`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .filters import fractional_parts, weighted_parts
from .spectral import SpectralOperator, SpectralVector
from .stopping import StopRule, discrepancy_stop

METHODS = ("nsiwt", "nsift")
ALPHA_FLOOR = 1e-300


class ScheduleError(ValueError):
    pass


# -- parameter sequences ----------------------------------------------------

@dataclass(frozen=True)
class ConstantAlpha:
    value: float
    kind = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise ScheduleError("alpha must be positive")

    def values(self, n):
        return np.full(n, float(self.value))

    @property
    def label(self):
        return f"constant:alpha={self.value:g}"


@dataclass(frozen=True)
class GeometricAlpha:
    """``alpha_k = a0 * q**k`` with ``0 < q < 1``."""

    a0: float
    q: float
    kind = "geometric"

    def __post_init__(self):
        if not self.a0 > 0:
            raise ScheduleError("a0 must be positive")
        if not 0 < self.q < 1:
            raise ScheduleError("geometric alpha needs q in (0, 1)")

    def values(self, n):
        k = np.arange(1, n + 1)
        return np.maximum(self.a0 * np.exp(k * math.log(self.q)), ALPHA_FLOOR)

    @property
    def label(self):
        return f"geometric:a0={self.a0:g},q={self.q:g}"


@dataclass(frozen=True)
class FactorialAlpha:
    """``alpha_k = 1/k!``, clamped at ``ALPHA_FLOOR`` once it would underflow."""

    kind = "factorial"

    def values(self, n):
        k = np.arange(1, n + 1)
        with np.errstate(under="ignore"):
            return np.maximum(np.exp(-gammaln(k + 1.0)), ALPHA_FLOOR)

    def clamped(self, n) -> bool:
        return bool(n >= 1 and -gammaln(n + 1.0) < math.log(ALPHA_FLOOR))

    @property
    def label(self):
        return "factorial"


@dataclass(frozen=True)
class PolynomialAlpha:
    """``alpha_k = c * k**p``."""

    c: float = 1.0
    p: float = 2.0
    kind = "polynomial"

    def __post_init__(self):
        if not self.c > 0:
            raise ScheduleError("c must be positive")

    def values(self, n):
        return self.c * np.arange(1, n + 1, dtype=float) ** self.p

    @property
    def label(self):
        return f"polynomial:c={self.c:g},p={self.p:g}"


@dataclass(frozen=True)
class ExponentialAlpha:
    """``alpha_k = a0 * base**k`` with ``base > 1`` (growing parameters)."""

    a0: float = 1.0
    base: float = 2.0
    kind = "exponential"

    def __post_init__(self):
        if not self.a0 > 0 or not self.base > 1:
            raise ScheduleError("exponential alpha needs a0 > 0 and base > 1")

    def values(self, n):
        return self.a0 * self.base ** np.arange(1, n + 1, dtype=float)

    @property
    def label(self):
        return f"exponential:a0={self.a0:g},base={self.base:g}"


@dataclass(frozen=True)
class CustomAlpha:
    seq: tuple
    kind = "custom"

    def __post_init__(self):
        object.__setattr__(self, "seq", tuple(float(a) for a in self.seq))
        if not self.seq or min(self.seq) <= 0:
            raise ScheduleError("custom alpha values must be positive")

    def values(self, n):
        if n > len(self.seq):
            raise ScheduleError(f"custom alpha sequence has only {len(self.seq)} entries")
        return np.array(self.seq[:n])

    @property
    def label(self):
        return "custom"


@dataclass(frozen=True)
class ScaledAlpha:
    """``alpha_k`` given for the unnormalized operator, mapped to ``||K|| = 1``.

    A weighted step with ``(alpha, r)`` on ``c K`` equals the step with
    ``alpha / c^(r+1)`` on ``K``; a fractional step needs ``alpha / c^2``.
    """

    base: object
    exponent: object
    norm_scale: float
    method: str
    kind = "scaled"

    def values(self, n):
        a = self.base.values(n)
        if self.method == "nsiwt":
            return a / self.norm_scale ** (self.exponent.values(n) + 1.0)
        return a / self.norm_scale**2

    def clamped(self, n) -> bool:
        return bool(getattr(self.base, "clamped", lambda _: False)(n))

    @property
    def label(self):
        return self.base.label


@dataclass(frozen=True)
class ConstantExponent:
    value: float
    kind = "constant"
    bounded = True

    def values(self, n):
        return np.full(n, float(self.value))

    @property
    def label(self):
        return f"{self.value:g}"


@dataclass(frozen=True)
class NonincreasingExponent:
    """``1 - (k-1)/100`` for ``k < 50``, then ``1/2``."""

    kind = "nonincreasing"
    bounded = True

    def values(self, n):
        k = np.arange(1, n + 1)
        return np.where(k < 50, 1.0 - (k - 1) / 100.0, 0.5)

    @property
    def label(self):
        return "nonincreasing"


@dataclass(frozen=True)
class LinearExponent:
    """``slope * k`` (unbounded)."""

    slope: float
    kind = "linear"
    bounded = False

    def __post_init__(self):
        if not self.slope > 0:
            raise ScheduleError("linear exponent slope must be positive")

    def values(self, n):
        return self.slope * np.arange(1, n + 1, dtype=float)

    @property
    def label(self):
        return f"linear({self.slope:g})"


@dataclass(frozen=True)
class CustomExponent:
    seq: tuple
    kind = "custom"
    bounded = True

    def __post_init__(self):
        object.__setattr__(self, "seq", tuple(float(a) for a in self.seq))
        if not self.seq:
            raise ScheduleError("custom exponent sequence is empty")

    def values(self, n):
        if n > len(self.seq):
            raise ScheduleError(f"custom exponent sequence has only {len(self.seq)} entries")
        return np.array(self.seq[:n])

    @property
    def label(self):
        return "custom"


@dataclass(frozen=True)
class ParamSchedule:
    """Sequences ``alpha_k`` and ``r_k`` (or ``gamma_k``), ``k = 1, 2, ...``.

    ``max_iter`` defaults to 200 for bounded exponent rules and 60 for
    unbounded ones.
    """

    alpha: object
    exponent: object
    max_iter: int | None = None

    def __post_init__(self):
        if self.max_iter is None:
            object.__setattr__(self, "max_iter", 200 if self.exponent.bounded else 60)
        if self.max_iter < 1:
            raise ScheduleError("max_iter must be positive")

    @classmethod
    def stationary(cls, alpha: float, exponent: float, max_iter: int | None = None):
        return cls(ConstantAlpha(alpha), ConstantExponent(exponent), max_iter)

    def sequences(self, n: int, method: str = "nsiwt", allow_nonregularizing: bool = False):
        if n > self.max_iter:
            raise ScheduleError(f"n = {n} exceeds max_iter = {self.max_iter}")
        a = self.alpha.values(n)
        e = self.exponent.values(n)
        if np.any(~(a > 0)):
            raise ScheduleError("alpha sequence must stay positive")
        if method == "nsift":
            if np.any(e < 0.5) and not allow_nonregularizing:
                raise ScheduleError("gamma sequence must stay >= 1/2")
            if np.any(~(e > 0)):
                raise ScheduleError("gamma sequence must stay positive")
        elif np.any(~(e >= 0)):
            raise ScheduleError("r sequence must stay non-negative")
        return a, e

    def in_units(self, norm_scale: float, method: str, units: str = "normalized"):
        """Schedule acting on the normalized spectrum.

        With ``units="physical"`` the alphas are read as parameters of the
        unnormalized operator ``norm_scale * K`` and rescaled accordingly.
        """
        if units == "normalized" or norm_scale == 1.0:
            return self
        if units != "physical":
            raise ScheduleError(f"unknown alpha units {units!r}")
        _check_method(method)
        return replace(self, alpha=ScaledAlpha(self.alpha, self.exponent, norm_scale, method))

    @property
    def clamped(self) -> bool:
        clamp = getattr(self.alpha, "clamped", None)
        return bool(clamp(self.max_iter)) if clamp else False

    @property
    def label(self):
        return f"{self.alpha.label}|{self.exponent.label}"


NS_SUCCESSION_R = ParamSchedule(FactorialAlpha(), LinearExponent(0.1))
NS_SUCCESSION_GAMMA = ParamSchedule(FactorialAlpha(), LinearExponent(0.5))


def _check_method(method):
    if method not in METHODS:
        raise ScheduleError(f"method must be one of {METHODS}, got {method!r}")


def step_parts(method: str, sigma, alpha: float, exponent: float):
    """One-step ``(F, 1 - F, F / sigma)`` for the given method."""
    _check_method(method)
    if method == "nsiwt":
        return weighted_parts(sigma, alpha, exponent)
    return fractional_parts(sigma, alpha, exponent)


# -- single steps -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IterationState:
    """Current iterate in v-coefficients; ``n = 0`` is the zero start."""

    coeffs: np.ndarray
    n: int = 0
    residual_norm: float = float("nan")
    history: tuple = field(default=())

    @classmethod
    def initial(cls, op: SpectralOperator, y_coeffs: SpectralVector, x0=None):
        c = np.zeros(op.rank) if x0 is None else np.asarray(x0, dtype=float).copy()
        return cls(c, 0, op.residual_norm(c, y_coeffs))


def _step(op, state, method, alpha_n, exp_n, y_coeffs):
    y_coeffs.check(op, "u")
    _, keep, gain = step_parts(method, op.sigma, alpha_n, exp_n)
    c = gain * y_coeffs.coeffs + keep * state.coeffs
    return replace(state, coeffs=c, n=state.n + 1,
                   residual_norm=op.residual_norm(c, y_coeffs))


def nsiwt_step(op: SpectralOperator, state: IterationState, alpha_n: float, r_n: float,
               y_coeffs: SpectralVector) -> IterationState:
    """``[(K*K)^((r+1)/2) + alpha I] x_n = (K*K)^((r-1)/2) K* y + alpha x_{n-1}``."""
    if not alpha_n > 0 or not r_n >= 0:
        raise ScheduleError("need alpha_n > 0 and r_n >= 0")
    return _step(op, state, "nsiwt", alpha_n, r_n, y_coeffs)


def nsift_step(op: SpectralOperator, state: IterationState, alpha_n: float, gamma_n: float,
               y_coeffs: SpectralVector, allow_nonregularizing: bool = False) -> IterationState:
    """``(K*K + alpha I)^g x_n = (K*K)^(g-1) K* y + [(K*K + alpha I)^g - (K*K)^g] x_{n-1}``."""
    if not alpha_n > 0 or not gamma_n > 0 or (gamma_n < 0.5 and not allow_nonregularizing):
        raise ScheduleError("need alpha_n > 0 and gamma_n >= 1/2")
    return _step(op, state, "nsift", alpha_n, gamma_n, y_coeffs)


# -- full runs ------------------------------------------------------------------

@dataclass(frozen=True)
class StopReport:
    khat: int
    reason: str
    residual: float
    rel_error: float | None = None
    converged: bool = True


def run_iteration(op: SpectralOperator, schedule: ParamSchedule, method: str, y,
                  stop: StopRule, truth=None, x0=None, allow_nonregularizing: bool = False):
    """Iterate until ``stop`` fires or ``schedule.max_iter`` is reached.

    ``y`` is a data vector (data units) or normalized u-coefficients.  When
    ``truth`` is given, relative errors are tracked in ``history`` as
    ``(n, residual, rel_error)`` tuples.  Hitting ``max_iter`` without the
    discrepancy test succeeding is reported with ``converged=False``.
    """
    _check_method(method)
    yc = y if isinstance(y, SpectralVector) else op.project(y)
    yc.check(op, "u")
    alphas, exps = schedule.sequences(schedule.max_iter, method, allow_nonregularizing)

    t_coeffs = t_perp = t_norm = None
    if truth is not None:
        tv = truth if isinstance(truth, SpectralVector) else op.coefficients(truth)
        t_coeffs, t_perp = tv.coeffs, tv.perp
        t_norm = math.hypot(np.linalg.norm(t_coeffs), t_perp)

    def rel_err(c):
        if t_coeffs is None:
            return None
        return math.hypot(np.linalg.norm(c - t_coeffs), t_perp) / t_norm

    state = IterationState.initial(op, yc, x0)
    history = [(0, state.residual_norm, rel_err(state.coeffs))]
    reason = "max-iter"
    for k in range(schedule.max_iter):
        prev = state.coeffs
        _, keep, gain = step_parts(method, op.sigma, alphas[k], exps[k])
        c = gain * yc.coeffs + keep * prev
        state = IterationState(c, k + 1, op.residual_norm(c, yc))
        err = rel_err(c)
        history.append((state.n, state.residual_norm, err))
        if stop.kind == "discrepancy" and discrepancy_stop(state.residual_norm, stop):
            reason = "discrepancy"
            break
        if stop.plateau_tol is not None:
            if err is not None:
                change = abs(err - history[-2][2])
            else:
                change = np.linalg.norm(c - prev) / max(np.linalg.norm(c), np.finfo(float).tiny)
            if change < stop.plateau_tol:
                reason = "plateau"
                break
    state = replace(state, history=tuple(history))
    converged = reason != "max-iter" or stop.kind == "max-only"
    report = StopReport(state.n, reason, state.residual_norm, history[-1][2], converged)
    return state, report


def noise_amplification(schedule: ParamSchedule, method: str, n: int) -> float:
    """``sum_k alpha_k^-1`` (NSIWT) or ``sum_k alpha_k^-gamma_k`` (NSIFT), ``k <= n``.

    Multiplied by the normalized noise level this bounds the distance between
    the noisy and the noise-free iterate after ``n`` steps (``||K|| = 1``).
    """
    _check_method(method)
    if n == 0:
        return 0.0
    a, e = schedule.sequences(n, method, allow_nonregularizing=True)
    if method == "nsiwt":
        return float(np.sum(1.0 / a))
    return float(np.sum(np.exp(-e * np.log(a))))


def error_propagator(schedule: ParamSchedule, method: str, n: int, sigma):
    """``prod_{k<=n} (1 - F_k(sigma))``, the noise-free error factor of a mode.

    Accumulated as a sum of logarithms; ``sigma`` may be an array.
    """
    _check_method(method)
    s = np.asarray(sigma, dtype=float)
    if np.any(~(s > 0)):
        raise ScheduleError("sigma must be positive")
    if n == 0:
        return np.ones_like(s) if s.ndim else 1.0
    a, e = schedule.sequences(n, method, allow_nonregularizing=True)
    total = np.zeros_like(s)
    with np.errstate(divide="ignore"):
        for ak, ek in zip(a, e):
            f, omf, _ = step_parts(method, s, ak, ek)
            total = total + np.where(f < 0.5, np.log1p(-np.minimum(f, 0.5)), np.log(omf))
    with np.errstate(under="ignore"):
        out = np.exp(total)
    return float(out) if s.ndim == 0 else out


# -- series diagnostics -------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsReport:
    """Partial sums of the divergence series for each probe ``sigma``.

    ``verdict`` is the analytic conclusion for the built-in families
    ("convergent-method", "non-convergent-method" or "advisory" when no
    closed-form argument applies).  ``beta`` and ``beta_tilde`` are
    ``sum alpha_k^-s`` and ``sum 1/(1 + alpha_k^s)`` at the horizon, with
    ``s = 1`` for NSIWT and ``s = sup gamma_k`` for NSIFT.
    """

    method: str
    schedule: str
    sigma_probes: np.ndarray
    partial_half: np.ndarray
    partial_full: np.ndarray
    growth_ratio: np.ndarray
    verdict: str
    reason: str
    beta: float
    beta_tilde: float
    clamped: bool


def _series_terms(method, sigma, alphas, exps):
    f = np.empty((sigma.size, alphas.size))
    for k, (ak, ek) in enumerate(zip(alphas, exps)):
        f[:, k] = step_parts(method, sigma, ak, ek)[0]
    return f


def _alpha_series_diverges(alpha, power: float) -> bool | None:
    """Whether ``sum alpha_k^-power`` diverges for a built-in alpha rule."""
    if isinstance(alpha, (ConstantAlpha, GeometricAlpha, FactorialAlpha)):
        return True
    if isinstance(alpha, PolynomialAlpha):
        return alpha.p * power <= 1
    if isinstance(alpha, ExponentialAlpha):
        return False
    return None


def _verdict(method, schedule, probes):
    alpha, expo = schedule.alpha, schedule.exponent
    if isinstance(alpha, ScaledAlpha):
        if not expo.bounded:
            return "advisory", "rescaled alphas with unbounded exponents"
        alpha = alpha.base
    if isinstance(alpha, CustomAlpha) or isinstance(expo, CustomExponent):
        return "advisory", "custom sequences: numeric partial sums only"
    if expo.bounded:
        if method == "nsiwt":
            div = _alpha_series_diverges(alpha, 1.0)
            why = "bounded r_k: converges iff sum 1/alpha_k diverges"
        else:
            gmax = float(np.max(expo.values(min(schedule.max_iter, 60))))
            glim = float(expo.values(schedule.max_iter)[-1])
            div = _alpha_series_diverges(alpha, glim)
            why = f"gamma_k -> {glim:g}: converges iff sum alpha_k^-{glim:g} diverges"
            if gmax != glim and div is None:
                return "advisory", why
        if div is None:
            return "advisory", why
        return ("convergent-method" if div else "non-convergent-method"), why
    slope = expo.slope
    if method == "nsiwt":
        if isinstance(alpha, FactorialAlpha):
            return ("convergent-method",
                    "r_k -> inf monotonically and (sum 1/alpha_k)^-1 ~ 1/n! = o(sigma^(r_n+1))")
        if isinstance(alpha, GeometricAlpha):
            ok = bool(np.all(probes ** slope >= alpha.q))
            why = ("r_k = c k, alpha_k = a0 q^k: series terms tend to a positive limit iff "
                   "sigma^c >= q; probes " + ("all satisfy" if ok else "violate") + " it")
            return ("convergent-method" if ok else "non-convergent-method"), why
        return ("non-convergent-method",
                "r_k -> inf with alpha_k bounded below: sum sigma^(r_k+1)/alpha_k converges for sigma < 1")
    if isinstance(alpha, (FactorialAlpha, GeometricAlpha)):
        return ("convergent-method",
                "gamma_k -> inf, alpha_k -> 0 and alpha_k gamma_k -> 0")
    return ("non-convergent-method",
            "gamma_k -> inf with alpha_k bounded below: terms decay geometrically for every sigma")


def schedule_diagnostics(schedule: ParamSchedule, method: str, sigma_probes,
                         horizon: int = 200) -> DiagnosticsReport:
    """Numeric and analytic check of the convergence series of a schedule."""
    _check_method(method)
    if horizon < 10:
        raise ScheduleError("horizon must be at least 10")
    probes = np.atleast_1d(np.asarray(sigma_probes, dtype=float))
    sched = replace(schedule, max_iter=max(horizon, schedule.max_iter))
    a, e = sched.sequences(horizon, method, allow_nonregularizing=True)
    terms = _series_terms(method, probes, a, e)
    half = terms[:, : horizon // 2].sum(axis=1)
    full = terms.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(half > 0, full / half, np.inf)
    verdict, reason = _verdict(method, sched, probes)
    s = 1.0 if method == "nsiwt" else float(np.max(e))
    with np.errstate(over="ignore"):
        beta = float(np.sum(np.exp(-s * np.log(a))))
        beta_tilde = float(np.sum(1.0 / (1.0 + np.exp(s * np.log(a)))))
    return DiagnosticsReport(method, sched.label, probes, half, full, ratio, verdict,
                             reason, beta, beta_tilde, sched.clamped)


# -- speed comparison -------------------------------------------------------------

@dataclass(frozen=True)
class SpeedComparison:
    n: np.ndarray
    error_a: np.ndarray
    error_b: np.ndarray
    crossover: int | None

    def rows(self):
        return list(zip(self.n.tolist(), self.error_a.tolist(), self.error_b.tolist()))


def compare_speed(op: SpectralOperator, schedule_a: ParamSchedule, schedule_b: ParamSchedule,
                  method_a: str, method_b: str, y, n_max: int) -> SpeedComparison:
    """Noise-free error norms of two runs for ``n = 1..n_max``.

    The reference solution is ``sum y_m / sigma_m v_m``.  ``crossover`` is the
    first ``n`` at which run a is strictly more accurate than run b after
    having been at least as inaccurate before (``None`` if never).
    """
    yc = y if isinstance(y, SpectralVector) else op.project(y)
    exact = yc.coeffs / op.sigma
    errs_a, errs_b = [], []
    for method, sched, out in ((method_a, schedule_a, errs_a), (method_b, schedule_b, errs_b)):
        a, e = sched.sequences(n_max, method, allow_nonregularizing=True)
        c = np.zeros(op.rank)
        for k in range(n_max):
            _, keep, gain = step_parts(method, op.sigma, a[k], e[k])
            c = gain * yc.coeffs + keep * c
            out.append(np.linalg.norm(c - exact))
    errs_a, errs_b = np.array(errs_a), np.array(errs_b)
    crossover = None
    behind = True  # at n = 0 both errors equal ||exact||
    for k in range(n_max):
        if errs_a[k] < errs_b[k] and behind:
            crossover = k + 1
            break
        behind = errs_a[k] >= errs_b[k]
    return SpeedComparison(np.arange(1, n_max + 1), errs_a, errs_b, crossover)


# -- text forms ---------------------------------------------------------------

def _kv(text):
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ScheduleError(f"malformed parameter {item!r}")
        out[key.strip()] = float(val)
    return out


def parse_alpha_rule(text: str):
    """``geometric:a0=0.01,q=0.7``, ``factorial``, ``constant:alpha=0.1``,
    ``polynomial:c=1,p=2`` or ``exponential:a0=1,base=2``."""
    kind, _, rest = text.partition(":")
    try:
        kw = _kv(rest)
        if kind == "constant":
            return ConstantAlpha(kw["alpha"])
        if kind == "geometric":
            return GeometricAlpha(kw["a0"], kw["q"])
        if kind == "factorial":
            return FactorialAlpha()
        if kind == "polynomial":
            return PolynomialAlpha(**kw)
        if kind == "exponential":
            return ExponentialAlpha(**kw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScheduleError(f"bad alpha rule {text!r}: {exc}") from exc
    raise ScheduleError(f"unknown alpha rule {kind!r}")


def parse_exponent_rule(text: str):
    """``0.6``, ``nonincreasing`` or ``linear(0.1)``."""
    text = text.strip()
    if text == "nonincreasing":
        return NonincreasingExponent()
    if text.startswith("linear(") and text.endswith(")"):
        try:
            return LinearExponent(float(text[7:-1]))
        except ValueError as exc:
            raise ScheduleError(f"bad linear exponent {text!r}") from exc
    try:
        return ConstantExponent(float(text))
    except ValueError as exc:
        raise ScheduleError(f"bad exponent rule {text!r}") from exc


def parse_method(text: str):
    """``nsiwt:r=0.6`` or ``nsift:gamma=linear(0.5)`` -> ``(method, exponent rule)``."""
    method, _, rest = text.partition(":")
    _check_method(method)
    key, _, val = rest.partition("=")
    want = "r" if method == "nsiwt" else "gamma"
    if key.strip() != want:
        raise ScheduleError(f"{method} needs '{want}=...', got {rest!r}")
    return method, parse_exponent_rule(val)
