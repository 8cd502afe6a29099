"""Entropy functionals, dissipation terms and the truncated power functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import lotka_volterra_rates, steady_state
from .elliptic import apply_K, assemble, gradient
from .errors import BrinkmanError, ConfigurationError, GridMismatch, NonPositiveSteadyState


def xlogx(u):
    """``u * log(u)`` with the limit value 0 at u = 0."""
    u = np.asarray(u, dtype=float)
    return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


def _u(state):
    return getattr(state, "u", state)


def h1(state, grid):
    """Boltzmann-Shannon entropy ``sum_i int u_i (log u_i - 1)``."""
    u = np.asarray(_u(state), dtype=float)
    return float(grid.h * np.sum(xlogx(u) - u))


def h1_relative(state, ss, grid):
    """Relative entropy with respect to the constant state ``ss.u_inf``."""
    u_inf = ss.u_inf if hasattr(ss, "u_inf") else np.asarray(ss, dtype=float)
    if np.any(u_inf <= 0):
        raise NonPositiveSteadyState(f"steady state must be positive, got {u_inf}")
    u = np.asarray(_u(state), dtype=float)
    z = u_inf[:, None]
    ratio = np.where(u > 0, u / z, 1.0)
    integrand = np.where(u > 0, u * np.log(ratio), 0.0) - (u - z)
    return float(grid.h * np.sum(integrand))


def _apply_K_or_identity(op, u):
    return u if op is None else apply_K(op, u)


def h2(state, op, p, grid=None):
    """Nonlocal Rao entropy ``sum_ij a_ij int K(u_i) K(u_j)``.

    ``op=None`` stands for ``eps = 0``: K is the identity and ``grid`` is needed.
    """
    if op is None:
        if grid is None:
            raise ConfigurationError("h2 without an operator needs the grid")
        return h2_local(state, grid, p)
    ku = apply_K(op, np.asarray(_u(state), dtype=float))
    return float(op.grid.h * np.sum(ku * (p.a @ ku)))


def h2_local(state, grid, p):
    u = np.asarray(_u(state), dtype=float)
    return float(grid.h * np.sum(u * (p.a @ u)))


def h2_relative(state, ref, op, p, grid=None):
    """Relative Rao entropy: :func:`h2` of the difference ``u - ubar``."""
    u = np.asarray(_u(state), dtype=float)
    ubar = np.asarray(_u(ref), dtype=float)
    if u.shape != ubar.shape:
        raise GridMismatch(f"states live on different grids: {u.shape} vs {ubar.shape}")
    return h2(u - ubar, op, p, grid)


@dataclass(frozen=True)
class Dissipation:
    fisher: float
    rao: float
    react: float
    rhs: float


def dissipation_snapshot(state, p, grid, face_op=None):
    """Terms of the Boltzmann-Shannon entropy balance for the current state.

    ``fisher = 4 sigma sum_i ||grad sqrt(u_i)||^2``,
    ``rao = sum_ij a_ij <K grad u_i, K grad u_j>`` with K on interior faces
    (identity when ``face_op`` is None), ``react = sum_i b_ii int u_i^2 log u_i``
    and ``rhs = sum_i int u_i (f_i(u) - b_ii u_i) log u_i``.
    """
    u = np.asarray(_u(state), dtype=float)
    h = grid.h
    gs = gradient(grid, np.sqrt(u), "noflux")[:, 1:-1]
    fisher = 4.0 * p.sigma * h * float(np.sum(gs * gs))
    gu = gradient(grid, u, "noflux")[:, 1:-1]
    kgu = _apply_K_or_identity(face_op, gu)
    rao = h * float(np.sum(kgu * (p.a @ kgu)))
    if p.reaction:
        bii = np.diag(p.b)[:, None]
        logu = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
        react = h * float(np.sum(bii * u * u * logu))
        rhs = h * float(np.sum(u * (lotka_volterra_rates(u, p) - bii * u) * logu))
    else:
        react = rhs = 0.0
    return Dissipation(fisher, rao, react, rhs)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: tuple
    linf: tuple
    H1: float
    H1_rel: float
    H2: float
    D_fisher: float
    D_rao: float
    D_react: float
    RHS: float
    H2_rel: float | None = None

    @property
    def dissipation_terms(self):
        return (self.D_fisher, self.D_rao, self.D_react)


def diagnostics_header(n):
    return (
        ["t"]
        + [f"mass_{i + 1}" for i in range(n)]
        + [f"linf_{i + 1}" for i in range(n)]
        + ["H1", "H1_rel", "H2", "D_fisher", "D_rao", "D_react", "RHS"]
    )


def diagnostics_row(rec):
    return [rec.t, *rec.mass, *rec.linf, rec.H1, rec.H1_rel, rec.H2, rec.D_fisher, rec.D_rao, rec.D_react, rec.RHS]


class Diagnostician:
    """Evaluates a :class:`DiagnosticsRecord` for states of one problem."""

    def __init__(self, grid, p, backend="nonlocal"):
        self.grid = grid
        self.p = p
        if backend == "nonlocal":
            self.cell_op = assemble(grid, p.eps, "cell")
            self.face_op = assemble(grid, p.eps, "face")
        else:
            self.cell_op = self.face_op = None
        try:
            self.steady = steady_state(p)
            if np.any(self.steady.u_inf <= 0):
                self.steady = None
        except BrinkmanError:
            self.steady = None

    def h2(self, u):
        return h2(u, self.cell_op, self.p, self.grid)

    def record(self, state):
        u = state.u
        d = dissipation_snapshot(u, self.p, self.grid, self.face_op)
        rel = h1_relative(u, self.steady, self.grid) if self.steady is not None else math.nan
        return DiagnosticsRecord(
            t=state.t,
            mass=tuple(float(m) for m in self.grid.h * u.sum(axis=1)),
            linf=tuple(float(m) for m in u.max(axis=1)),
            H1=h1(u, self.grid),
            H1_rel=rel,
            H2=self.h2(u),
            D_fisher=d.fisher,
            D_rao=d.rao,
            D_react=d.react,
            RHS=d.rhs,
        )


# --- truncated power functions ------------------------------------------------


def truncate(z, N):
    """``(z)_+^N = max(0, min(N, z))``."""
    return np.clip(z, 0.0, N)


def _check_cutoff_domain(z, N):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise ConfigurationError("cutoff functions are defined for finite z >= 0")
    if not N >= math.e**2:
        raise ConfigurationError(f"cutoff level N must be at least e^2, got {N}")
    return z


def _S_power(z, g, N):
    zc = np.minimum(z, N)
    return np.where(z <= N, zc**g / g, N**g / g + N ** (g - 1) * (z - N))


def _R_power(z, g, N):
    zc = np.minimum(z, N)
    w = z - N
    return np.where(
        z <= N,
        zc**g / (g * (g - 1)),
        N**g / (g * (g - 1)) + N ** (g - 1) * w / (g - 1) + N ** (g - 2) * w * w / 2,
    )


def cutoff_S(z, gamma, N):
    """Primitive of ``((s)_+^N)^(gamma-1)``.

    ``gamma = 0`` is the logarithmic variant integrated from 1 (z > 0 needed);
    ``gamma > 0`` integrates from 0, giving ``z^gamma / gamma`` up to N and an
    affine continuation beyond.
    """
    z = _check_cutoff_domain(z, N)
    if gamma == 0:
        if np.any(z <= 0):
            raise ConfigurationError("the logarithmic cutoff needs z > 0")
        return np.where(z <= N, np.log(np.minimum(z, N)), math.log(N) + (z - N) / N)
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    return _S_power(z, gamma, N)


def cutoff_R(z, gamma, N):
    """Second primitive. ``gamma = 1``: ``int_e^z S^0``; ``gamma > 1``: ``int_0^z S^(gamma-1)``."""
    z = _check_cutoff_domain(z, N)
    if gamma == 1:
        w = z - N
        zc = np.minimum(z, N)
        low = np.where(zc > 0, zc * (np.log(np.where(zc > 0, zc, 1.0)) - 1.0), 0.0)
        high = N * (math.log(N) - 1) + w * math.log(N) + w * w / (2 * N)
        return np.where(z <= N, low, high)
    if not gamma > 1:
        raise ConfigurationError(f"R needs gamma = 1 or gamma > 1, got {gamma}")
    return _R_power(z, gamma, N)


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=50):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(
            m, b, fm, frm, fb, right, 0.5 * tol, depth - 1
        )

    if b == a:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def cutoff_R_quadrature(z, gamma, N, tol=1e-10):
    """:func:`cutoff_R` by adaptive Simpson quadrature of :func:`cutoff_S`, split at N."""
    z = float(z)
    lower = math.e if gamma == 1 else 0.0
    sgamma = gamma - 1

    def S(s):
        return float(cutoff_S(s, sgamma, N))

    total = 0.0
    sign = 1.0
    lo, hi = (lower, z) if z >= lower else (z, lower)
    if z < lower:
        sign = -1.0
    knots = [lo] + [k for k in (1.0, N) if lo < k < hi] + [hi]
    for a, b in zip(knots[:-1], knots[1:]):
        if gamma == 1 and a == 0.0:
            # log singularity at 0: integrate s log s - s analytically on [0, b]
            total += b * (math.log(b) - 1.0) if b > 0 else 0.0
            continue
        scale = max(1.0, abs(S(b)) * (b - a))
        total += adaptive_simpson(S, a, b, tol * scale)
    return sign * total


@dataclass
class CutoffReport:
    samples: int
    violations: dict
    max_excess: dict

    @property
    def passed(self):
        return all(v == 0 for v in self.violations.values())


def cutoff_inequality_checks(z, gamma, N, slack=1e-9):
    """Evaluate the four truncated-power inequalities on arrays of samples.

    Returns ``{name: relative excess}``; an inequality holds where the excess is
    nonpositive.  The slack is relative: ``lhs <= rhs + slack*max(1, |lhs|, |rhs|)``.
    """
    z = np.asarray(z, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    N = np.asarray(N, dtype=float)
    k = 0.5 * (gamma + 1.0)
    zt = np.clip(z, 0.0, N)
    S, R = _S_power, _R_power

    # the R inequalities need gamma > 1; elsewhere they report -inf (not applicable)
    has_r = gamma > 1.0
    gr = np.where(has_r, gamma, 2.0)
    pairs = {
        "truncated_S_product": (zt * S(z, gamma, N), (k * k / gamma) * S(z, k, N) ** 2),
        "truncated_power": (zt**k, k * S(z, k, N)),
        "R_lower": (S(z, gr, N) / (gr - 1), R(z, gr, N)),
        "R_double": (R(z, 2 * gr, N), gr * (gr - 1) ** 2 / (2 * (2 * gr - 1)) * R(z, gr, N) ** 2),
    }
    out = {}
    for name, (lhs, rhs) in pairs.items():
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        excess = (lhs - rhs) / scale - slack
        out[name] = np.where(has_r, excess, -np.inf) if name.startswith("R_") else excess
    return out


def cutoff_inequality_suite(samples=10_000, seed=0, slack=1e-9):
    """Randomized check over z in [0, 3N], gamma in (1, 8], N in [e^2, 100]."""
    rng = np.random.default_rng(seed)
    N = rng.uniform(math.e**2, 100.0, samples)
    z = rng.uniform(0.0, 1.0, samples) * 3.0 * N
    gamma = 8.0 - rng.uniform(0.0, 7.0, samples)
    excess = cutoff_inequality_checks(z, gamma, N, slack)
    return CutoffReport(
        samples,
        {k: int(np.sum(v > 0)) for k, v in excess.items()},
        {k: float(np.max(v) + slack) for k, v in excess.items()},
    )
