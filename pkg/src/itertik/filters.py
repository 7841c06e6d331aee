"""Filter functions of the Tikhonov family and the generic filter solver.

A filter ``F(sigma)`` defines the regularized solution

    x = sum_m F(sigma_m) / sigma_m * <y, u_m> v_m.

Families
--------
``classical-tikhonov``  sigma^2 / (sigma^2 + alpha)
``weighted``            sigma^(r+1) / (sigma^(r+1) + alpha)
``fractional``          sigma^(2 gamma) / (sigma^2 + alpha)^gamma
``siwt``                n-fold iterated weighted filter
``sift``                n-fold iterated fractional filter
``tsvd-reference``      1 for sigma >= alpha, else 0 (baseline only)

The iterated filters satisfy ``1 - F^(n) = (1 - F)^n``; both ``F`` and
``1 - F`` are evaluated with ``log1p``/``expm1`` so that either one keeps full
relative accuracy when it is tiny.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralError, SpectralOperator, SpectralVector, powers

FAMILIES = ("classical-tikhonov", "weighted", "fractional", "siwt", "sift", "tsvd-reference")
_ALIASES = {"tikhonov": "classical-tikhonov", "classical": "classical-tikhonov",
            "tsvd": "tsvd-reference"}


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    """A filter family with its parameters.

    ``r`` is read by the weighted families, ``gamma`` by the fractional ones
    and ``n_iter`` by the iterated ones.  ``gamma < 1/2`` is rejected unless
    ``allow_nonregularizing`` is set: the formula is still defined there but
    ``F(sigma)/sigma`` is unbounded as ``sigma -> 0``.
    """

    family: str
    alpha: float
    r: float = 1.0
    gamma: float = 1.0
    n_iter: int = 1
    allow_nonregularizing: bool = False

    def __post_init__(self):
        family = _ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise FilterError(f"unknown filter family {self.family!r}")
        object.__setattr__(self, "family", family)
        if not self.alpha > 0:
            raise FilterError("alpha must be positive")
        if not self.r >= 0:
            raise FilterError("r must be non-negative")
        if not self.gamma > 0 or (self.gamma < 0.5 and not self.allow_nonregularizing):
            raise FilterError("gamma must be >= 1/2")
        if int(self.n_iter) != self.n_iter or self.n_iter < 1:
            raise FilterError("n_iter must be a positive integer")
        object.__setattr__(self, "n_iter", int(self.n_iter))

    def with_alpha(self, alpha: float) -> "FilterSpec":
        return FilterSpec(self.family, alpha, self.r, self.gamma, self.n_iter,
                          self.allow_nonregularizing)

    @property
    def beta(self) -> float:
        """Exponent with ``sup F/sigma ~ alpha^-beta``."""
        if self.family in ("weighted", "siwt"):
            return 1.0 / (self.r + 1.0)
        if self.family == "tsvd-reference":
            return 1.0
        return 0.5

    @property
    def qualification(self) -> float:
        """Largest source exponent ``nu`` for which the filter is order optimal."""
        return {
            "classical-tikhonov": 2.0,
            "weighted": self.r + 1.0,
            "fractional": 2.0,
            "siwt": self.n_iter * (self.r + 1.0),
            "sift": 2.0 * self.n_iter,
            "tsvd-reference": np.inf,
        }[self.family]

    @property
    def label(self) -> str:
        parts = [f"alpha={self.alpha:g}"]
        if self.family in ("weighted", "siwt"):
            parts.append(f"r={self.r:g}")
        if self.family in ("fractional", "sift"):
            parts.append(f"gamma={self.gamma:g}")
        if self.family in ("siwt", "sift"):
            parts.append(f"n={self.n_iter}")
        return f"{self.family}:" + ",".join(parts)


def _check_sigma(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=float)
    if np.any(~(s > 0)):
        raise FilterError("sigma must be positive")
    return s


def weighted_parts(sigma, alpha, r):
    """``(F, 1 - F, F / sigma)`` of the weighted filter."""
    t = powers(sigma, r + 1.0)
    den = t + alpha
    return t / den, alpha / den, powers(sigma, r) / den


def fractional_parts(sigma, alpha, gamma):
    """``(F, 1 - F, F / sigma)`` of the fractional filter."""
    s = sigma * sigma
    if gamma == 1:
        # classical Tikhonov, written exactly as weighted_parts(sigma, alpha, 1)
        den = powers(sigma, 2.0) + alpha
        return powers(sigma, 2.0) / den, alpha / den, powers(sigma, 1.0) / den
    w = alpha / (s + alpha)
    # log(s / (s + alpha)); log1p only where 1 - w is not itself a cancellation
    with np.errstate(divide="ignore"):
        lf = np.where(w < 0.5, np.log1p(-np.minimum(w, 0.5)), np.log(s) - np.log(s + alpha))
    with np.errstate(under="ignore"):
        f = np.exp(gamma * lf)
    omf = -np.expm1(gamma * lf)
    return f, omf, f / sigma


def iterate_parts(f, omf, n):
    """``(F^(n), 1 - F^(n))`` from one-step ``F`` and ``1 - F``."""
    with np.errstate(divide="ignore"):
        log_omf = np.where(f < 0.5, np.log1p(-np.minimum(f, 0.5)), np.log(omf))
    with np.errstate(under="ignore"):
        return -np.expm1(n * log_omf), np.exp(n * log_omf)


def _parts(spec: FilterSpec, sigma):
    s = _check_sigma(sigma)
    fam = spec.family
    if fam == "classical-tikhonov":
        den = s * s + spec.alpha
        return s * s / den, spec.alpha / den, s / den
    if fam == "tsvd-reference":
        f = (s >= spec.alpha).astype(float)
        return f, 1.0 - f, f / s
    if fam in ("weighted", "siwt"):
        f, omf, gain = weighted_parts(s, spec.alpha, spec.r)
    else:
        f, omf, gain = fractional_parts(s, spec.alpha, spec.gamma)
    if fam in ("siwt", "sift") and spec.n_iter > 1:
        f, omf = iterate_parts(f, omf, spec.n_iter)
        gain = f / s
    return f, omf, gain


def _out(a, like):
    return float(a) if np.ndim(like) == 0 else a


def filter_value(spec: FilterSpec, sigma):
    """Evaluate ``F(sigma)``; scalar in, scalar out."""
    return _out(_parts(spec, sigma)[0], sigma)


def one_minus_filter(spec: FilterSpec, sigma):
    """Evaluate ``1 - F(sigma)`` without cancellation."""
    return _out(_parts(spec, sigma)[1], sigma)


def filter_gain(spec: FilterSpec, sigma):
    """Evaluate ``F(sigma) / sigma``."""
    return _out(_parts(spec, sigma)[2], sigma)


def filter_coefficients(op: SpectralOperator, spec: FilterSpec, y_coeffs: SpectralVector):
    """v-coefficients of the filtered solution from normalized u-coefficients."""
    y_coeffs.check(op, "u")
    return filter_gain(spec, op.sigma) * y_coeffs.coeffs


def filter_solve(op: SpectralOperator, spec: FilterSpec, y) -> np.ndarray:
    """``x = sum F(sigma_m)/sigma_m <y,u_m> v_m`` for data ``y`` in data units."""
    try:
        yc = op.project(y)
    except SpectralError as exc:
        raise FilterError(str(exc)) from exc
    return op.synthesize(filter_coefficients(op, spec, yc))


@dataclass(frozen=True)
class QualificationTable:
    alphas: np.ndarray
    sup_values: np.ndarray
    argmax_sigma: np.ndarray
    slope: float
    predicted_slope: float


def filter_qualification_check(spec: FilterSpec, nu: float, alpha_grid,
                               n_sigma: int = 2000) -> QualificationTable:
    """Measure ``sup_sigma (1 - F(sigma)) sigma^nu`` along ``alpha_grid``.

    The supremum is taken over ``n_sigma`` log-spaced points in ``[1e-8, 1]``
    and the fitted slope ``d log(sup) / d log(alpha)`` is compared with
    ``beta * min(nu, qualification)``.
    """
    if not nu > 0:
        raise FilterError("nu must be positive")
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.ndim != 1 or alphas.size < 2 or np.any(alphas <= 0):
        raise FilterError("alpha_grid must hold at least two positive values")
    sig = np.logspace(-8, 0, n_sigma)
    sups = np.empty(alphas.size)
    where = np.empty(alphas.size)
    for i, a in enumerate(alphas):
        vals = one_minus_filter(spec.with_alpha(a), sig) * sig**nu
        j = int(np.argmax(vals))
        sups[i], where[i] = vals[j], sig[j]
    slope = np.polyfit(np.log(alphas), np.log(sups), 1)[0]
    predicted = spec.beta * min(nu, spec.qualification)
    return QualificationTable(alphas, sups, where, float(slope), float(predicted))
