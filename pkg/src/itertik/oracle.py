"""Dense reference implementations used to cross-check the spectral path.

Each routine forms the operator equations of the methods explicitly: matrix
functions of ``W = A^T A`` come from a symmetric eigendecomposition, with
negative powers taken as pseudo-inverse powers on the positive eigenspace,
and every step is a direct ``np.linalg.solve``.  Cost is cubic per step, so
the number of unknowns is capped at ``MAX_COLS``.

By default ``A`` and ``y`` are divided by ``||A||_2`` first, which puts the
parameters on the same (normalized) scale as the fast path.

Eigenvalues of ``W`` carry an absolute error of order ``eps * ||W||``, so a
singular value ``sigma`` is only resolved to relative accuracy about
``eps / sigma^2``.  ``rel_cutoff`` drops modes with ``sigma < rel_cutoff *
sigma_1``; the default keeps everything above ``n * eps`` in ``W``.
"""
from __future__ import annotations

import numpy as np

from .iterate import ParamSchedule

MAX_COLS = 256


class OracleError(ValueError):
    pass


class _Gram:
    """Eigendecomposition of ``A^T A`` with helpers for its matrix powers."""

    def __init__(self, a, y, normalized, rel_cutoff=None):
        a = np.asarray(a, dtype=float)
        y = np.asarray(y, dtype=float)
        if a.ndim != 2 or y.shape != (a.shape[0],):
            raise OracleError("shape mismatch between A and y")
        if a.shape[1] > MAX_COLS:
            raise OracleError(f"oracle is limited to {MAX_COLS} columns, got {a.shape[1]}")
        if normalized:
            scale = np.linalg.norm(a, 2)
            a, y = a / scale, y / scale
        lam, self.q = np.linalg.eigh(a.T @ a)
        tol = a.shape[1] * np.finfo(float).eps * max(lam[-1], 0.0)
        if rel_cutoff is not None:
            tol = max(tol, rel_cutoff**2 * max(lam[-1], 0.0))
        self.positive = lam > tol
        self.lam = np.where(self.positive, lam, 0.0)
        self.aty = a.T @ y
        self.n = a.shape[1]

    def power(self, p, shift=0.0):
        """``(W + shift I)^p``; for ``shift = 0`` restricted to ``ran W``."""
        if shift == 0.0:
            d = np.zeros(self.n)
            d[self.positive] = self.lam[self.positive] ** p
        else:
            d = (self.lam + shift) ** p
        return (self.q * d) @ self.q.T


def _check(alpha, name="alpha"):
    if not alpha > 0:
        raise OracleError(f"{name} must be positive")


def _solve(lhs, rhs):
    x = np.linalg.solve(lhs, rhs)
    if not np.all(np.isfinite(x)):
        raise OracleError("shifted system is numerically singular")
    return x


def dense_weighted_solve(a, y, alpha: float, r: float, normalized: bool = True,
                         rel_cutoff: float | None = None) -> np.ndarray:
    """``[W^((r+1)/2) + alpha I]^-1 W^((r-1)/2) A^T y``."""
    _check(alpha)
    if not r >= 0:
        raise OracleError("r must be non-negative")
    g = _Gram(a, y, normalized, rel_cutoff)
    lhs = g.power((r + 1) / 2) + alpha * np.eye(g.n)
    return _solve(lhs, g.power((r - 1) / 2) @ g.aty)


def dense_nsiwt_run(a, y, schedule: ParamSchedule, n: int, normalized: bool = True,
                    x0=None, rel_cutoff: float | None = None) -> np.ndarray:
    """``n`` steps of ``[W^((r+1)/2) + a_k I] x_k = W^((r-1)/2) A^T y + a_k x_{k-1}``."""
    g = _Gram(a, y, normalized, rel_cutoff)
    alphas, rs = schedule.sequences(n, "nsiwt")
    x = np.zeros(g.n) if x0 is None else np.asarray(x0, dtype=float)
    eye = np.eye(g.n)
    for ak, rk in zip(alphas, rs):
        _check(ak)
        lhs = g.power((rk + 1) / 2) + ak * eye
        x = _solve(lhs, g.power((rk - 1) / 2) @ g.aty + ak * x)
    return x


def dense_nsift_run(a, y, schedule: ParamSchedule, n: int, normalized: bool = True,
                    x0=None, rel_cutoff: float | None = None) -> np.ndarray:
    """``n`` steps of
    ``(W + a_k I)^g x_k = W^(g-1) A^T y + [(W + a_k I)^g - W^g] x_{k-1}``.
    """
    g = _Gram(a, y, normalized, rel_cutoff)
    alphas, gammas = schedule.sequences(n, "nsift")
    x = np.zeros(g.n) if x0 is None else np.asarray(x0, dtype=float)
    for ak, gk in zip(alphas, gammas):
        _check(ak)
        lhs = g.power(gk, shift=ak)
        x = _solve(lhs, g.power(gk - 1) @ g.aty + (lhs - g.power(gk)) @ x)
    return x


def max_relative_deviation(x_fast, x_dense) -> float:
    x_dense = np.asarray(x_dense, dtype=float)
    return float(np.linalg.norm(np.asarray(x_fast) - x_dense) / np.linalg.norm(x_dense))
