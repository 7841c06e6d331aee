"""Singular-value representation of a discretized compact operator.

Every solver in the package works on a :class:`SpectralOperator`, i.e. on the
triplets ``(sigma_m, u_m, v_m)`` of a dense matrix.  The singular values are
divided by the largest one at construction so that the working spectrum lies
in ``(0, 1]``; the original ``sigma_1`` is kept in ``norm_scale`` and is only
used to report residuals in the units of the data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CUTOFF = 1e-14


class SpectralError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """SVD triplets ``A = norm_scale * sum_m sigma_m u_m v_m^T``.

    Attributes
    ----------
    sigma : ndarray, shape (p,)
        Normalized singular values, non-increasing, ``sigma[0] == 1``.
    u_basis : ndarray, shape (m_rows, p)
        Left singular vectors as columns.
    v_basis : ndarray, shape (n_cols, p)
        Right singular vectors as columns.
    norm_scale : float
        The largest singular value of the original matrix.
    """

    sigma: np.ndarray
    u_basis: np.ndarray
    v_basis: np.ndarray
    norm_scale: float = 1.0

    def __post_init__(self):
        sigma = _frozen(self.sigma)
        u = _frozen(self.u_basis)
        v = _frozen(self.v_basis)
        if sigma.ndim != 1 or sigma.size == 0:
            raise SpectralError("sigma must be a non-empty vector")
        if u.shape[1] != sigma.size or v.shape[1] != sigma.size:
            raise SpectralError("basis column count must equal len(sigma)")
        if not np.all(sigma > 0):
            raise SpectralError("singular values must be strictly positive")
        if np.any(np.diff(sigma) > 0):
            raise SpectralError("singular values must be non-increasing")
        if not self.norm_scale > 0:
            raise SpectralError("norm_scale must be positive")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "u_basis", u)
        object.__setattr__(self, "v_basis", v)
        object.__setattr__(self, "norm_scale", float(self.norm_scale))

    @property
    def rank(self) -> int:
        return self.sigma.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.u_basis.shape[0], self.v_basis.shape[0]

    def dense(self, physical: bool = True) -> np.ndarray:
        """Reassemble the (retained-rank) matrix."""
        scale = self.norm_scale if physical else 1.0
        return scale * (self.u_basis * self.sigma) @ self.v_basis.T

    def project(self, y) -> "SpectralVector":
        """Data vector -> normalized u-coefficients ``<y, u_m> / norm_scale``.

        The part of ``y`` outside ``span{u_m}`` is kept as a norm in
        ``perp``; it cannot be fitted by any solver but enters residuals.
        """
        y = np.asarray(y, dtype=float)
        if y.shape != (self.shape[0],):
            raise SpectralError(f"expected data of length {self.shape[0]}, got {y.shape}")
        coeffs = self.u_basis.T @ y
        rest = y - self.u_basis @ coeffs
        return SpectralVector(coeffs / self.norm_scale, "u",
                              perp=float(np.linalg.norm(rest)) / self.norm_scale)

    def coefficients(self, x) -> "SpectralVector":
        """Domain vector -> v-coefficients ``<x, v_m>``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.shape[1],):
            raise SpectralError(f"expected domain vector of length {self.shape[1]}, got {x.shape}")
        coeffs = self.v_basis.T @ x
        rest = x - self.v_basis @ coeffs
        return SpectralVector(coeffs, "v", perp=float(np.linalg.norm(rest)))

    def synthesize(self, coeffs) -> np.ndarray:
        """v-coefficients -> domain vector."""
        if isinstance(coeffs, SpectralVector):
            coeffs.check(self, "v")
            coeffs = coeffs.coeffs
        return self.v_basis @ np.asarray(coeffs, dtype=float)

    def residual_norm(self, x_coeffs, y_coeffs: "SpectralVector") -> float:
        """``||y - A x||`` in data units for ``x = synthesize(x_coeffs)``."""
        r = y_coeffs.coeffs - self.sigma * x_coeffs
        return self.norm_scale * float(np.hypot(np.linalg.norm(r), y_coeffs.perp))


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """Expansion coefficients in the u- or v-basis of one operator."""

    coeffs: np.ndarray
    basis: str
    perp: float = 0.0

    def __post_init__(self):
        if self.basis not in ("u", "v"):
            raise SpectralError("basis must be 'u' or 'v'")
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    def check(self, op: SpectralOperator, basis: str):
        if self.basis != basis:
            raise SpectralError(f"expected {basis}-basis coefficients, got {self.basis}-basis")
        if self.coeffs.shape != (op.rank,):
            raise SpectralError(f"coefficient length {self.coeffs.size} != rank {op.rank}")


@dataclass(frozen=True)
class SourceCondition:
    """Smoothness class ``x = (K^T K)^{nu/2} w`` with ``||w|| <= rho``."""

    nu: float
    rho: float = 1.0

    def __post_init__(self):
        if not self.nu >= 0:
            raise SpectralError("nu must be non-negative")
        if not self.rho > 0:
            raise SpectralError("rho must be positive")


def decompose(matrix, rel_cutoff: float = DEFAULT_CUTOFF) -> SpectralOperator:
    """Thin SVD of ``matrix`` keeping ``sigma_m > rel_cutoff * sigma_1``.

    Singular values are returned divided by ``sigma_1``; the factor is stored
    as ``norm_scale``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise SpectralError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise SpectralError("matrix has non-finite entries")
    if not 0 <= rel_cutoff < 1:
        raise SpectralError("rel_cutoff must lie in [0, 1)")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise SpectralError("rank zero")
    keep = s > rel_cutoff * s[0]
    return SpectralOperator(s[keep] / s[0], u[:, keep], vt[keep].T, norm_scale=s[0])


def diagonal_operator(sigmas) -> SpectralOperator:
    """Operator with trivial bases ``u_m = v_m = e_m``."""
    s = np.asarray(sigmas, dtype=float)
    if s.ndim != 1 or s.size == 0 or not np.all(s > 0):
        raise SpectralError("sigmas must be a non-empty positive vector")
    eye = np.eye(s.size)
    return SpectralOperator(s / s[0], eye, eye, norm_scale=s[0])


def apply(op: SpectralOperator, x, physical: bool = False) -> np.ndarray:
    """``K x`` from the expansion; normalized units unless ``physical``."""
    c = op.coefficients(x).coeffs
    y = op.u_basis @ (op.sigma * c)
    return op.norm_scale * y if physical else y


def apply_adjoint(op: SpectralOperator, y, physical: bool = False) -> np.ndarray:
    """``K^T y`` from the expansion; normalized units unless ``physical``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (op.shape[0],):
        raise SpectralError(f"expected data of length {op.shape[0]}, got {y.shape}")
    x = op.v_basis @ (op.sigma * (op.u_basis.T @ y))
    return op.norm_scale * x if physical else x


def powers(base, exponent) -> np.ndarray:
    """``base**exponent`` for positive bases; underflow gives a clean 0."""
    with np.errstate(under="ignore"):
        return np.power(np.asarray(base, dtype=float), exponent)


def fractional_power_apply(op: SpectralOperator, exponent: float, x) -> np.ndarray:
    """``(K^T K)^exponent x`` restricted to ``span{v_m}``."""
    if not np.isfinite(exponent) or exponent < 0:
        raise SpectralError("exponent must be finite and non-negative")
    c = op.coefficients(x).coeffs
    return op.v_basis @ (powers(op.sigma, 2.0 * exponent) * c)


def make_source_solution(op: SpectralOperator, sc: SourceCondition, omega_coeffs,
                         rescale: bool = False) -> np.ndarray:
    """Build ``x = (K^T K)^{nu/2} w`` from the v-coefficients of ``w``.

    With ``rescale`` the coefficients are scaled down to ``||w|| = rho``
    when they exceed it; otherwise an oversized ``w`` is rejected.
    """
    if isinstance(omega_coeffs, SpectralVector):
        omega_coeffs.check(op, "v")
        w = omega_coeffs.coeffs
    else:
        w = np.asarray(omega_coeffs, dtype=float)
        if w.shape != (op.rank,):
            raise SpectralError(f"coefficient length {w.size} != rank {op.rank}")
    norm = np.linalg.norm(w)
    if norm > sc.rho * (1 + 1e-12):
        if not rescale:
            raise SpectralError(f"||omega|| = {norm:g} exceeds rho = {sc.rho:g}")
        w = w * (sc.rho / norm)
    return op.synthesize(powers(op.sigma, sc.nu) * w)
