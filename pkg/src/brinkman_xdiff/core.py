"""Grids, parameter sets, steady states and small dense linear algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigurationError,
    NegativeRate,
    NonPositiveDefinitePressure,
    NonPositiveEps,
    NonPositiveSigma,
    NonSymmetricPressure,
    SingularCompetitionMatrix,
)

DENSE_TOL = 1e-12


def _frozen(a, ndim=None):
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ConfigurationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform cell-centred mesh on ``[x_left, x_right]``."""

    x_left: float
    x_right: float
    M: int
    h: float = field(init=False)
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = (self.x_right - self.x_left) / self.M
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "centers", _frozen(self.x_left + (np.arange(self.M) + 0.5) * h))

    @property
    def faces(self):
        return self.x_left + np.arange(self.M + 1) * self.h

    @property
    def length(self):
        return self.x_right - self.x_left

    def same_as(self, other):
        return (self.x_left, self.x_right, self.M) == (other.x_left, other.x_right, other.M)


def make_grid(x_left, x_right, M):
    if int(M) != M or M < 2:
        raise ConfigurationError(f"grid needs at least 2 cells, got M={M}")
    if not (math.isfinite(x_left) and math.isfinite(x_right)) or not x_left < x_right:
        raise ConfigurationError(f"empty or invalid interval ({x_left}, {x_right})")
    return Grid1D(float(x_left), float(x_right), int(M))


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Coefficients of the reaction-cross-diffusion system.

    ``a`` holds the pressure coefficients, ``b0`` the intrinsic growth rates and
    ``b`` the competition matrix of the Lotka-Volterra terms.  ``eps = 0``
    selects the local (Darcy) model.  ``reaction=False`` switches the source
    terms off entirely.  ``alpha`` is filled in by :func:`validate_params`.
    """

    n: int
    a: np.ndarray
    b0: np.ndarray
    b: np.ndarray
    sigma: float
    eps: float
    reaction: bool = True
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, 2))
        object.__setattr__(self, "b0", _frozen(self.b0, 1))
        object.__setattr__(self, "b", _frozen(self.b, 2))
        n = self.n
        if self.a.shape != (n, n) or self.b.shape != (n, n) or self.b0.shape != (n,):
            raise ConfigurationError(
                f"shape mismatch for n={n}: a{self.a.shape}, b{self.b.shape}, b0{self.b0.shape}"
            )

    @property
    def local(self):
        return self.eps == 0.0


def validate_params(p, local=False):
    """Check the standing assumptions and return a copy carrying ``alpha``.

    ``eps = 0`` is accepted only when ``local`` is set (or the params were
    already built for the local model with ``eps == 0`` and ``local=True``).
    """
    a, b, b0 = p.a, p.b, p.b0
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(b0))):
        raise ConfigurationError("non-finite model coefficients")
    if not np.allclose(a, a.T, rtol=0.0, atol=DENSE_TOL * (1.0 + np.abs(a).max())):
        raise NonSymmetricPressure("pressure matrix a must be symmetric")
    alpha = min_eigen_sym(a)
    if alpha <= 0.0:
        raise NonPositiveDefinitePressure(alpha)
    if np.any(b0 < 0):
        raise NegativeRate("intrinsic rates b0 must be nonnegative")
    off = b[~np.eye(p.n, dtype=bool)]
    if np.any(off < 0):
        raise NegativeRate("off-diagonal competition rates must be nonnegative")
    if np.any(np.diag(b) <= 0):
        raise NegativeRate("self-competition rates b_ii must be positive")
    if not (p.sigma > 0 and math.isfinite(p.sigma)):
        raise NonPositiveSigma(f"sigma must be positive, got {p.sigma}")
    if not math.isfinite(p.eps) or p.eps < 0:
        raise NonPositiveEps(f"eps must be nonnegative, got {p.eps}")
    if p.eps == 0 and not local:
        raise NonPositiveEps("eps = 0 requires the local model")
    if local and p.eps != 0:
        raise NonPositiveEps("the local model requires eps = 0")
    return replace(p, alpha=float(alpha))


def min_eigen_sym(m, tol=DENSE_TOL, max_sweeps=64):
    """Smallest eigenvalue of the symmetric part of ``m`` by cyclic Jacobi."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= 1e-3 * tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    return float(np.min(np.diag(a)))


def solve_dense(m, rhs, pivot_tol=1e-14):
    """Gaussian elimination with partial pivoting for a small dense system."""
    a = np.array(m, dtype=float)
    x = np.array(rhs, dtype=float)
    n = a.shape[0]
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < pivot_tol:
            raise SingularCompetitionMatrix(f"pivot {a[piv, k]:.3g} below {pivot_tol:g} in column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
        x[k + 1 :] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Constant coexistence state ``u_inf`` with ``B u_inf = b0``.

    ``beta`` is the smallest eigenvalue of the symmetric part of ``B``; ``mu``
    is a lower bound for the densities, supplied by whoever checks it.
    """

    u_inf: np.ndarray
    beta: float
    mu: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "u_inf", _frozen(self.u_inf, 1))


def steady_state(p, mu=None):
    u_inf = solve_dense(p.b, p.b0)
    resid = np.max(np.abs(p.b @ u_inf - p.b0))
    if resid > DENSE_TOL * (1.0 + np.max(np.abs(p.b0))) * max(1.0, np.abs(p.b).max() * p.n):
        raise SingularCompetitionMatrix(f"steady state residual {resid:.3g} too large")
    beta = min_eigen_sym(0.5 * (p.b + p.b.T))
    return SteadyState(u_inf, beta, mu)


def lotka_volterra_rates(u, p):
    """f_i(u) = b_i0 - sum_j b_ij u_j, broadcast over trailing cell axes."""
    u = np.asarray(u, dtype=float)
    return p.b0.reshape((-1,) + (1,) * (u.ndim - 1)) - np.tensordot(p.b, u, axes=1)


@dataclass(frozen=True, eq=False)
class State:
    """Cell averages ``u`` (shape ``(n, M)``) at time ``t``."""

    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = _frozen(self.u)
        if u.ndim == 1:
            u = u.reshape(1, -1)
            u.setflags(write=False)
        if u.ndim != 2:
            raise ConfigurationError(f"state must be (n, M), got shape {u.shape}")
        if np.any(u < 0):
            raise ConfigurationError("densities must be nonnegative")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def M(self):
        return self.u.shape[1]
