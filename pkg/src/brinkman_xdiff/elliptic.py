"""Discrete Brinkman operator ``-eps*Laplace + I`` with homogeneous Dirichlet data.

Two staggerings are provided on a cell-centred :class:`~brinkman_xdiff.core.Grid1D`:

* ``"cell"`` acts on the M cell averages.  The wall condition is imposed by a
  reflected ghost value (ghost = -first interior value), which keeps the matrix
  symmetric and is second-order accurate at cell centres.
* ``"face"`` acts on the M-1 interior faces.  The boundary faces sit on the walls
  and carry the Dirichlet value exactly.  Velocities live here.

``apply_L`` inverts the operator with the Thomas algorithm; ``apply_K`` applies
the inverse square root through a cached symmetric eigendecomposition, so that
``K(K(g)) = L(g)`` up to round-off.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import Grid1D
from .errors import ConfigurationError, DomainMismatch, GridMismatch
from .tridiag import TridiagonalFactor

STAGGERINGS = ("cell", "face")

_cache: dict = {}
_cache_lock = threading.Lock()


class BrinkmanOperator:
    """Factorized ``A = -eps*Laplace_h + I`` on one staggering of ``grid``."""

    def __init__(self, grid, eps, stagger="cell"):
        if not eps > 0 or not math.isfinite(eps):
            raise ConfigurationError(f"Brinkman operator needs eps > 0, got {eps}")
        if stagger not in STAGGERINGS:
            raise ConfigurationError(f"unknown staggering {stagger!r}")
        self.grid = grid
        self.eps = float(eps)
        self.stagger = stagger
        c = self.eps / grid.h**2
        size = grid.M if stagger == "cell" else grid.M - 1
        diag = np.full(size, 1.0 + 2.0 * c)
        if stagger == "cell":
            diag[0] += c
            diag[-1] += c
        off = np.full(size - 1, -c)
        self._factor = TridiagonalFactor(off, diag, off)
        self._spectral = None
        self._lock = threading.Lock()

    @property
    def size(self):
        return self._factor.size

    @property
    def diag(self):
        return self._factor.diag

    @property
    def offdiag(self):
        return self._factor.upper

    def matrix(self):
        return self._factor.dense()

    def matvec(self, v):
        return self._factor.matvec(v)

    def spectral(self):
        """Eigenpairs ``(lam, Q)`` with ``A = Q diag(lam) Q^T``, built once."""
        if self._spectral is None:
            with self._lock:
                if self._spectral is None:
                    lam, q = eigh_tridiagonal(self._factor.diag, self._factor.upper)
                    lam.setflags(write=False)
                    q.setflags(write=False)
                    self._spectral = (lam, q)
        return self._spectral

    def _check(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.size:
            raise GridMismatch(f"expected {self.size} values on the {self.stagger} grid, got {g.shape[-1]}")
        return g

    def solve(self, g):
        return self._factor.solve(self._check(g))

    def sqrt_inverse(self, g):
        g = self._check(g)
        lam, q = self.spectral()
        return (q @ ((q.T @ g.reshape(-1, self.size).T) / np.sqrt(lam)[:, None])).T.reshape(g.shape)


def assemble(grid, eps, stagger="cell"):
    """Return the (cached) operator for ``grid`` and ``eps``.

    The cache key uses exact bit patterns of ``h`` and ``eps``.
    """
    key = (grid.M, float(grid.h).hex(), float(eps).hex(), stagger)
    with _cache_lock:
        op = _cache.get(key)
        if op is None or not op.grid.same_as(grid):
            op = BrinkmanOperator(grid, eps, stagger)
            _cache[key] = op
    return op


def clear_cache():
    with _cache_lock:
        _cache.clear()


def apply_L(op, g):
    """Brinkman resolvent ``L_eps g = A^{-1} g`` along the last axis."""
    return op.solve(g)


def apply_K(op, g):
    """Square root of the resolvent, ``K_eps g = Q diag(lam^{-1/2}) Q^T g``."""
    return op.sqrt_inverse(g)


def gradient(grid, w, bc="noflux"):
    """Face differences of cell values; returns ``M + 1`` face values.

    ``bc="noflux"`` uses a mirrored ghost (zero boundary gradient),
    ``bc="dirichlet0"`` a reflected ghost ``-w`` so the wall value is zero.
    """
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape[:-1] + (w.shape[-1] + 1,))
    out[..., 1:-1] = np.diff(w, axis=-1) / grid.h
    if bc == "noflux":
        out[..., 0] = 0.0
        out[..., -1] = 0.0
    elif bc == "dirichlet0":
        out[..., 0] = 2.0 * w[..., 0] / grid.h
        out[..., -1] = -2.0 * w[..., -1] / grid.h
    else:
        raise ConfigurationError(f"unknown boundary treatment {bc!r}")
    return out


def face_weights(grid):
    """Quadrature weights of the dual (face) mesh: ``h/2`` at the walls, ``h`` inside."""
    wts = np.full(grid.M + 1, grid.h)
    wts[0] = wts[-1] = 0.5 * grid.h
    return wts


def cell_dot(grid, f, g):
    return grid.h * np.sum(np.asarray(f) * np.asarray(g), axis=-1)


def face_dot(grid, f, g):
    return np.sum(face_weights(grid) * np.asarray(f) * np.asarray(g), axis=-1)


# --- closed-form kernel on (-1, 1) -------------------------------------------


def _sinh_cosh_over_sinh(a, b, c):
    """sinh(a) cosh(b) / sinh(c) for a, b >= 0, c > 0, without overflow."""
    return np.exp(a + b - c) * (-np.expm1(-2.0 * a)) * (1.0 + np.exp(-2.0 * b)) / (2.0 * -np.expm1(-2.0 * c))


def _sinh_sinh_over_sinh(a, b, c):
    return np.exp(a + b - c) * (-np.expm1(-2.0 * a)) * (-np.expm1(-2.0 * b)) / (2.0 * -np.expm1(-2.0 * c))


def _cosh_cosh_over_sinh(a, b, c):
    return np.exp(a + b - c) * (1.0 + np.exp(-2.0 * a)) * (1.0 + np.exp(-2.0 * b)) / (2.0 * -np.expm1(-2.0 * c))


class GreenKernel:
    """Fundamental solution of ``v -> -eps v'' + v`` on (-1, 1) with v(+-1) = 0.

    Points with ``x == s`` use the ``x <= s`` branch.
    """

    def __init__(self, eps):
        if not eps > 0:
            raise ConfigurationError(f"kernel needs eps > 0, got {eps}")
        self.eps = float(eps)
        self.root = math.sqrt(self.eps)

    def _args(self, x, s):
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        return x, s, x <= s, 2.0 / self.root

    def U(self, x, s):
        x, s, left, c = self._args(x, s)
        r = self.root
        lo = -_sinh_sinh_over_sinh((1 + x) / r, (1 - s) / r, c)
        hi = -_sinh_sinh_over_sinh((1 - x) / r, (1 + s) / r, c)
        return np.where(left, lo, hi) / r

    def dU_ds(self, x, s):
        x, s, left, c = self._args(x, s)
        r = self.root
        lo = _sinh_cosh_over_sinh((1 + x) / r, (1 - s) / r, c)
        hi = -_sinh_cosh_over_sinh((1 - x) / r, (1 + s) / r, c)
        return np.where(left, lo, hi) / self.eps

    def F(self, x, s):
        """Kernel of the derivative representation ``v' = -u + int u(s) F(., s) ds``.

        Only stated for ``eps = 1``.
        """
        if self.eps != 1.0:
            raise ConfigurationError("F(x, s) is only available for eps = 1")
        x, s, left, c = self._args(x, s)
        lo = _cosh_cosh_over_sinh(1 + x, 1 - s, c)
        hi = _cosh_cosh_over_sinh(1 - x, 1 + s, c)
        return np.where(left, lo, hi)


def _require_unit_interval(grid):
    if grid.x_left != -1.0 or grid.x_right != 1.0:
        raise DomainMismatch(f"kernel backend needs the domain (-1, 1), got ({grid.x_left}, {grid.x_right})")


def green_matrix(grid, eps):
    _require_unit_interval(grid)
    x = grid.centers
    return GreenKernel(eps).dU_ds(x[:, None], x[None, :])


def green_solve(grid, u, eps):
    """Midpoint quadrature of ``v(x) = int u(s) dU/ds(x, s) ds``.

    Approximates the solution of ``-eps v'' + v = u'`` with v(+-1) = 0.
    """
    _require_unit_interval(grid)
    u = np.asarray(u, dtype=float)
    return grid.h * (u @ green_matrix(grid, eps).T)


COTH2_BOUND = 1.5 + 1.0 / math.tanh(2.0)


class BoundReport:
    def __init__(self, lhs, rhs, passed, v, dv):
        self.lhs = lhs
        self.rhs = rhs
        self.passed = passed
        self.v = v
        self.dv = dv

    def __repr__(self):
        return f"BoundReport(lhs={self.lhs:.6g}, rhs={self.rhs:.6g}, passed={self.passed})"


def green_derivative_bound_check(grid, u, eps=1.0, margin=1e-6):
    """Check ``||v'||_1 <= (3/2 + coth 2) ||u||_1`` for the kernel solution with eps = 1."""
    _require_unit_interval(grid)
    if eps != 1.0:
        raise ConfigurationError("the derivative bound is stated for eps = 1")
    u = np.asarray(u, dtype=float)
    x = grid.centers
    kern = GreenKernel(1.0)
    v = green_solve(grid, u, 1.0)
    dv = -u + grid.h * (u @ kern.F(x[:, None], x[None, :]).T)
    lhs = float(grid.h * np.sum(np.abs(dv)))
    rhs = float(COTH2_BOUND * grid.h * np.sum(np.abs(u)))
    return BoundReport(lhs, rhs, lhs <= rhs + margin, v, dv)


# --- identity suite used by operator-check and the tests ---------------------


IDENTITY_TOLERANCES = {
    "K(K(g))=L(g)": 1e-9,
    "energy": 1e-8,
    "contraction": 1e-12,
    "residual": 1e-10,
}


def identity_violations(grid, eps, g):
    """Scaled violations of the resolvent identities for one source ``g``.

    Each entry is compared with :data:`IDENTITY_TOLERANCES`:
    ``max|K(K g) - L g| / (1 + |g|_inf)``,
    ``|eps |grad L g|^2 + |L g|^2 - |K g|^2| / (1 + |g|^2)``,
    ``|L g| - |K g|`` and the solve residual ``|A L g - g|_inf / (1 + |g|_inf)``.
    """
    op = assemble(grid, eps, "cell")
    lg = apply_L(op, g)
    kg = apply_K(op, g)
    kkg = apply_K(op, kg)
    g_inf = float(np.max(np.abs(g)))
    g_sq = float(cell_dot(grid, g, g))
    grad_lg = gradient(grid, lg, "dirichlet0")
    energy_lhs = eps * float(face_dot(grid, grad_lg, grad_lg)) + float(cell_dot(grid, lg, lg))
    energy_rhs = float(cell_dot(grid, kg, kg))
    return {
        "K(K(g))=L(g)": float(np.max(np.abs(kkg - lg))) / (1 + g_inf),
        "energy": abs(energy_lhs - energy_rhs) / (1 + g_sq),
        "contraction": math.sqrt(float(cell_dot(grid, lg, lg))) - math.sqrt(energy_rhs),
        "residual": float(np.max(np.abs(op.matvec(lg) - g))) / (1 + g_inf),
    }


def analytic_errors(sizes=(32, 64, 128, 256)):
    """Max-norm errors of the cell solve of ``-v'' + v = 1`` on (-1, 1)."""
    errs = []
    for m in sizes:
        grid = Grid1D(-1.0, 1.0, m)
        v = apply_L(assemble(grid, 1.0), np.ones(m))
        exact = 1.0 - np.cosh(grid.centers) / math.cosh(1.0)
        errs.append(float(np.max(np.abs(v - exact))))
    return errs


def observed_orders(sizes, errors):
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(sizes[1:] / sizes[:-1])


def operator_suite(sizes=(64, 256), eps_values=(1.0, 0.01), samples=20, seed=0):
    """Rows ``(identity, max_violation, tolerance, passed)`` for operator-check."""
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(IDENTITY_TOLERANCES, -math.inf)
    for m in sizes:
        grid = Grid1D(-1.0, 1.0, m)
        for eps in eps_values:
            for _ in range(samples):
                g = rng.normal(size=m) * rng.uniform(0.1, 10.0)
                for name, val in identity_violations(grid, eps, g).items():
                    worst[name] = max(worst[name], val)
    rows = [(name, val, IDENTITY_TOLERANCES[name], val <= IDENTITY_TOLERANCES[name]) for name, val in worst.items()]

    analytic_sizes = (32, 64, 128, 256)
    orders = observed_orders(analytic_sizes, analytic_errors(analytic_sizes))
    dev = float(np.max(np.abs(orders - 2.0)))
    rows.append(("analytic_order_deviation", dev, 0.2, dev <= 0.2))

    centre = abs(float(GreenKernel(1.0).dU_ds(0.0, 0.0)) - 0.5)
    rows.append(("kernel_centre_value", centre, 1e-12, centre <= 1e-12))

    grid = Grid1D(-1.0, 1.0, 128)
    excess = -math.inf
    for _ in range(samples):
        rep = green_derivative_bound_check(grid, rng.uniform(0.0, 1.0, grid.M) ** rng.uniform(0.5, 4.0))
        excess = max(excess, rep.lhs - rep.rhs)
    rows.append(("derivative_bound_excess", excess, 1e-6, excess <= 1e-6))
    return rows


def green_tridiagonal_gap(sizes=(32, 64, 128, 256, 512), eps=1.0, profile=None, derivative=None):
    """Relative max-norm gap between :func:`green_solve` and the tridiagonal solve.

    Both approximate ``-eps v'' + v = u'`` with v(+-1) = 0.  The tridiagonal
    side is fed ``derivative`` at the cell centres, or ``np.gradient`` of the
    profile when no derivative is given.  The default profile is cos(pi x / 2).
    """
    if profile is None:
        def profile(x):
            return np.cos(0.5 * np.pi * x)

        def derivative(x):
            return -0.5 * np.pi * np.sin(0.5 * np.pi * x)

    gaps = []
    for m in sizes:
        grid = Grid1D(-1.0, 1.0, m)
        u = profile(grid.centers)
        du = derivative(grid.centers) if derivative is not None else np.gradient(u, grid.h, edge_order=2)
        v_kernel = green_solve(grid, u, eps)
        v_tri = apply_L(assemble(grid, eps, "cell"), du)
        gaps.append(float(np.max(np.abs(v_kernel - v_tri)) / np.max(np.abs(v_tri))))
    return np.array(gaps)
