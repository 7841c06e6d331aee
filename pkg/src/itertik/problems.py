"""Test problems: foxgood, deriv2 (case 3), Gaussian blur and diagonal beds.

The discretizations follow the usual Regularization Tools conventions:
midpoint collocation with weight ``h = 1/n`` for foxgood, the Galerkin
matrix of the Green's function of ``-d^2/dt^2`` for deriv2, and a Kronecker
product of banded Toeplitz factors for blur.  All generators are
deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spectral import DEFAULT_CUTOFF, SpectralOperator, decompose, diagonal_operator


class ProblemError(ValueError):
    pass


@dataclass(eq=False)
class Problem:
    """A discrete problem ``A x_true ~ y``; unpacks as ``(A, x_true, y)``.

    For diagonal test beds ``matrix`` is ``None`` and ``operator`` is given
    directly.  Otherwise the operator is the SVD of ``matrix`` at
    ``DEFAULT_CUTOFF``, computed on first access.
    """

    name: str
    matrix: np.ndarray | None
    x_true: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)
    _operator: SpectralOperator | None = None

    def __iter__(self):
        first = self.matrix if self.matrix is not None else self.operator
        return iter((first, self.x_true, self.y))

    @cached_property
    def operator(self) -> SpectralOperator:
        if self._operator is not None:
            return self._operator
        return decompose(self.matrix, DEFAULT_CUTOFF)

    def operator_at(self, cutoff: float) -> SpectralOperator:
        """SVD kept at a different relative cutoff (``0`` keeps every ``sigma > 0``)."""
        if cutoff == DEFAULT_CUTOFF or self.matrix is None:
            return self.operator
        cache = self.__dict__.setdefault("_by_cutoff", {})
        if cutoff not in cache:
            cache[cutoff] = decompose(self.matrix, cutoff)
        return cache[cutoff]

    @property
    def n_cols(self) -> int:
        return self.x_true.size


def _check_n(n, what="n"):
    if int(n) != n or n < 8:
        raise ProblemError(f"{what} must be an integer >= 8, got {n!r}")
    return int(n)


def foxgood(n: int = 1024) -> Problem:
    """Kernel ``sqrt(s^2 + t^2)`` on ``[0,1]``, exact solution ``x(t) = t``.

    ``y`` is the analytic right-hand side ``((1+s^2)^(3/2) - s^3)/3`` at the
    collocation points, so ``A x_true`` differs from it by the quadrature
    error.
    """
    n = _check_n(n)
    h = 1.0 / n
    t = h * (np.arange(1, n + 1) - 0.5)
    a = h * np.sqrt(t[:, None] ** 2 + t[None, :] ** 2)
    y = ((1.0 + t**2) ** 1.5 - t**3) / 3.0
    return Problem("foxgood", a, t.copy(), y, {"n": n})


def deriv2_case3(n: int = 1024) -> Problem:
    """Green's function of the second derivative with a hat-shaped solution.

    ``K(s,t) = s(t-1)`` for ``s < t`` and ``t(s-1)`` otherwise, discretized
    so that ``A`` maps cell averages to cell averages (``A_ij`` is the
    integral of ``K`` over cell ``i`` x cell ``j`` divided by ``h``).  The
    exact solution holds the cell averages of ``min(t, 1-t)``; ``y = A x_true``.
    """
    n = _check_n(n)
    h = 1.0 / n
    i = np.arange(1, n + 1, dtype=float)
    lo = np.minimum.outer(i, i)
    hi = np.maximum.outer(i, i)
    a = h * h * (lo - 0.5) * ((hi - 0.5) * h - 1.0)
    d = h * h * ((i * i - i + 0.25) * h - (i - 2.0 / 3.0))
    a[np.diag_indices(n)] = d
    t = h * (i - 0.5)
    x = np.where(i <= n // 2, t, 1.0 - t)
    return Problem("deriv2", a, x, a @ x, {"n": n, "case": 3})


def _mround(v: float) -> int:
    # round half away from zero, as in MATLAB
    return int(math.floor(v + 0.5))


def blur_image(side: int) -> np.ndarray:
    """Piecewise-constant test image, ``side x side``.

    Two nested ellipses (values 1 and 2), a triangle (3) and a cross (4),
    with all offsets and sizes proportional to ``side``.
    """
    n = _check_n(side, "side")
    n2, n3, n6, n12 = (_mround(n / k) for k in (2, 3, 6, 12))
    x = np.zeros((2 * n + 8, 2 * n + 8))

    def quadrant(level):
        i = np.arange(1, n6 + 1)[:, None] / n6
        j = np.arange(1, n3 + 1)[None, :] / n3
        q = ((i * i + j * j) < level).astype(float)
        q = np.hstack([q[:, ::-1], q])
        return np.vstack([q[::-1, :], q])

    x[2:2 + 2 * n6, n3 - 1:n3 - 1 + 2 * n3] = quadrant(1.0)
    x[n6:3 * n6, n3 - 1:n3 - 1 + 2 * n3] += 2 * quadrant(0.6)
    x[x == 3] = 2
    r0 = n3 + n12
    x[r0:r0 + n3, 1:1 + n3] = 3 * np.triu(np.ones((n3, n3)))
    m = 2 * n6 + 1
    cross = np.zeros((m, m))
    cross[n6, :] = 1
    cross[:, n6] = 1
    r0 = n2 + n12
    x[r0:r0 + m, n2:n2 + m] = 4 * cross
    return x[:n, :n].copy()


def blur(side: int = 40, band: int = 6, sigma2: float = 2.0) -> Problem:
    """Gaussian blur ``A = T (x) T`` with banded Toeplitz ``T``.

    ``T`` has entries ``exp(-k^2 / (2 sigma2))`` on the diagonals ``|k| < band``
    and is scaled so that its largest row sum is 1.  The image is stacked
    column by column.
    """
    side = _check_n(side, "side")
    if int(band) != band or not 1 <= band <= side:
        raise ProblemError(f"band must be an integer in [1, side], got {band!r}")
    if not sigma2 > 0:
        raise ProblemError("sigma2 must be positive")
    k = np.arange(side)
    z = np.where(k < band, np.exp(-(k**2) / (2.0 * sigma2)), 0.0)
    t = z[np.abs(k[:, None] - k[None, :])]
    row_max = float(t.sum(axis=1).max())
    t /= row_max
    a = np.kron(t, t)
    img = blur_image(side)
    x = img.reshape(-1, order="F")
    meta = {"side": side, "band": int(band), "sigma2": float(sigma2),
            "toeplitz_scale": row_max, "normalization": "max row sum of T = 1"}
    return Problem("blur", a, x, a @ x, meta)


def synthetic_diagonal(sigmas, x_coeffs) -> Problem:
    """Diagonal operator ``diag(sigmas)`` with trivial singular bases."""
    s = np.asarray(sigmas, dtype=float)
    c = np.asarray(x_coeffs, dtype=float)
    if c.shape != s.shape:
        raise ProblemError("sigmas and x_coeffs must have equal length")
    if s.size and np.any(np.diff(s) > 0):
        raise ProblemError("sigmas must be non-increasing")
    op = diagonal_operator(s)
    return Problem("diag", None, c.copy(), s * c, {"m": s.size}, _operator=op)


def diag_family(m: int = 801, smin: float = 1e-8, p: float | None = None,
                nu: float = 1.0) -> Problem:
    """Diagonal bed with log-spaced ``sigma`` in ``[smin, 1]`` (or ``m^-p``).

    The solution is ``x_m = sigma_m^nu w_m`` with flat ``w``, ``||w|| = 1``.
    """
    if m < 1:
        raise ProblemError("m must be positive")
    if p is None:
        if not 0 < smin < 1:
            raise ProblemError("smin must lie in (0, 1)")
        s = np.logspace(0.0, math.log10(smin), int(m))
    else:
        s = np.arange(1, int(m) + 1, dtype=float) ** (-float(p))
    w = np.full(s.size, 1.0 / math.sqrt(s.size))
    prob = synthetic_diagonal(s, s**nu * w)
    prob.meta.update({"smin": float(s[-1]), "p": p, "nu": nu})
    return prob


_BUILDERS = {
    "foxgood": (foxgood, {"n": int}),
    "deriv2": (deriv2_case3, {"n": int}),
    "blur": (blur, {"side": int, "band": int, "sigma2": float}),
    "diag": (diag_family, {"m": int, "smin": float, "p": float, "nu": float}),
}


def parse_params(text: str) -> dict:
    """``"a=1,b=2"`` -> ``{"a": "1", "b": "2"}``."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ProblemError(f"malformed parameter {item!r}")
        out[key.strip()] = val.strip()
    return out


def make_problem(spec: str) -> Problem:
    """Build a problem from ``name:key=value,...``, e.g. ``blur:side=16``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in _BUILDERS:
        raise ProblemError(f"unknown problem {name!r}; choose from {sorted(_BUILDERS)}")
    fn, types = _BUILDERS[name]
    kwargs = {}
    for key, val in parse_params(rest).items():
        if key not in types:
            raise ProblemError(f"problem {name!r} has no parameter {key!r}")
        try:
            kwargs[key] = types[key](float(val)) if types[key] is int else types[key](val)
        except ValueError as exc:
            raise ProblemError(f"bad value for {key}: {val!r}") from exc
    return fn(**kwargs)
