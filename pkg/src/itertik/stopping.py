"""Noise injection, the discrepancy principle and error / rate metrics.

Noise is drawn from numpy's ``PCG64`` bit generator through
``Generator.standard_normal`` (ziggurat transform).  Both are versioned
parts of numpy's stream-compatibility policy, so a ``(seed, length)`` pair
yields the same vector on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


class StoppingError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian noise rescaled to ``||e|| = xi * ||y||``."""

    xi: float
    seed: int = 0
    distribution: str = "gaussian"

    def __post_init__(self):
        if not self.xi >= 0:
            raise StoppingError("xi must be non-negative")
        if self.distribution != "gaussian":
            raise StoppingError(f"unsupported distribution {self.distribution!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise StoppingError("seed must be a 64-bit unsigned integer")

    def sample(self, size: int) -> np.ndarray:
        """Raw standard-normal draw before rescaling."""
        rng = np.random.Generator(np.random.PCG64(int(self.seed)))
        return rng.standard_normal(size)


def add_noise(y, model: NoiseModel):
    """Return ``(y + e, ||e||)`` with ``||e|| = xi * ||y||``."""
    y = np.asarray(y, dtype=float)
    if model.xi == 0:
        return y.copy(), 0.0
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        raise StoppingError("cannot scale relative noise on a zero vector")
    e = model.sample(y.size)
    e *= model.xi * ynorm / np.linalg.norm(e)
    return y + e, float(np.linalg.norm(e))


@dataclass(frozen=True)
class StopRule:
    """Discrepancy principle ``||y_delta - K x_k|| <= tau * delta`` or max-only.

    ``plateau_tol`` arms the noise-free plateau detector: the run stops once
    the step-to-step change of the error (or, without a reference solution,
    of the iterate, relative to its norm) falls below it.  ``None`` disables.
    """

    kind: str = "discrepancy"
    tau: float = 1.01
    delta: float = 0.0
    plateau_tol: float | None = None

    def __post_init__(self):
        if self.kind not in ("discrepancy", "max-only"):
            raise StoppingError(f"unknown stop rule {self.kind!r}")
        if self.kind == "discrepancy" and not self.tau > 1:
            raise StoppingError("tau must exceed 1")
        if not self.delta >= 0:
            raise StoppingError("delta must be non-negative")

    @classmethod
    def discrepancy(cls, delta: float, tau: float = 1.01) -> "StopRule":
        return cls("discrepancy", tau=tau, delta=delta)

    @classmethod
    def max_only(cls, plateau_tol: float | None = 1e-12) -> "StopRule":
        return cls("max-only", plateau_tol=plateau_tol)

    @property
    def threshold(self) -> float:
        return self.tau * self.delta


def discrepancy_stop(residual_norm: float, rule: StopRule) -> bool:
    if rule.kind != "discrepancy":
        raise StoppingError("discrepancy_stop needs a discrepancy rule")
    return residual_norm <= rule.tau * rule.delta


def relative_error(x_hat, x_true) -> float:
    x_true = np.asarray(x_true, dtype=float)
    ref = np.linalg.norm(x_true)
    if ref == 0:
        raise StoppingError("relative error against a zero reference")
    return float(np.linalg.norm(np.asarray(x_hat, dtype=float) - x_true) / ref)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))


def rate_fit(points) -> RateFit:
    """Least-squares line through ``(log delta, log error)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise StoppingError("rate_fit needs at least 4 (delta, error) pairs")
    d, e = pts[:, 0], pts[:, 1]
    if np.any(d <= 0) or np.any(np.diff(d) >= 0):
        raise StoppingError("deltas must be positive and strictly decreasing")
    if np.any(e <= 0):
        raise StoppingError("errors must be positive")
    fit = stats.linregress(np.log(d), np.log(e))
    return RateFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))
