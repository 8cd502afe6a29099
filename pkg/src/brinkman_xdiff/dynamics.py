"""Pressures, velocities, reactions and the positivity-preserving IMEX step.

One step advances every species by

    (I + dt*sigma*A_N) u_new = u + dt*(-div_h F + r),

where ``A_N`` is the no-flux diffusion matrix, ``F`` the upwinded advective flux
on interior faces (boundary faces carry zero total flux) and ``r`` the
Lotka-Volterra source evaluated explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import State, lotka_volterra_rates
from .elliptic import apply_L, assemble, gradient
from .errors import ConfigurationError, NonFiniteState, PositivityLoss, SimulationError
from .tridiag import TridiagonalFactor

log = logging.getLogger(__name__)

BACKENDS = ("nonlocal", "local")
CLAMP_TOL = 1e-12
SAFETY = 0.9
_TINY = 1e-300


def _u(state):
    return state.u if isinstance(state, State) else np.asarray(state, dtype=float)


def pressure(state, p):
    return p.a @ _u(state)


def reaction(state, p):
    u = _u(state)
    if not p.reaction:
        return np.zeros_like(u)
    return u * lotka_volterra_rates(u, p)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Face velocities, shape ``(n, M + 1)``; wall faces are zero."""

    v: np.ndarray


def velocity_operator(grid, p, backend):
    if backend == "local":
        return None
    if backend != "nonlocal":
        raise ConfigurationError(f"unknown backend {backend!r}")
    return assemble(grid, p.eps, "face")


def velocity(state, p, grid, backend="nonlocal", op=None):
    """Partial velocities on faces.

    nonlocal: ``-eps v'' + v = -dp/dx`` on the face grid with v = 0 at the walls;
    local: Darcy's law ``v = -dp/dx``.
    """
    grad_p = gradient(grid, pressure(state, p), "noflux")
    v = np.zeros_like(grad_p)
    if backend == "local":
        v[:, 1:-1] = -grad_p[:, 1:-1]
    elif backend == "nonlocal":
        if op is None:
            raise ConfigurationError("the nonlocal backend needs an assembled face operator")
        if op.stagger != "face" or op.size != grid.M - 1:
            raise ConfigurationError("velocity operator must live on the interior faces of the grid")
        v[:, 1:-1] = -apply_L(op, grad_p[:, 1:-1])
    else:
        raise ConfigurationError(f"unknown backend {backend!r}")
    return VelocityField(v)


def stable_dt(state, vel, p, h, dt_max=math.inf, safety=SAFETY):
    """Largest step keeping the explicit stage nonnegative and non-oscillatory.

    Outflow plus reaction loss per step stays below ``safety`` of the cell
    content; a second rate bounds the explicit cross-diffusion by the largest
    eigenvalue of ``-d/dx L (u a d/dx)``.
    """
    u = _u(state)
    v = vel.v if isinstance(vel, VelocityField) else np.asarray(vel)
    umax = u.max(axis=1)
    rate = 2.0 * float(np.max(np.abs(v))) / h
    if p.reaction:
        rate += float(np.max(p.b0 + p.b @ umax))
    diff = float(np.max(umax * np.abs(p.a).sum(axis=1)))
    cross = 4.0 * diff / (h * h + 4.0 * p.eps)
    rate = max(rate, cross)
    if rate <= _TINY:
        return float(dt_max)
    return float(min(dt_max, safety / rate))


@dataclass(frozen=True)
class StepConfig:
    dt: float
    backend: str = "nonlocal"
    advection: str = "upwind"
    reaction_treatment: str = "explicit"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.advection != "upwind" or self.reaction_treatment != "explicit":
            raise ConfigurationError("only upwind advection with explicit reactions is implemented")


def upwind_flux(u, v):
    """Advective flux on faces; upwind value by the sign of the face velocity."""
    flux = np.zeros_like(v)
    vi = v[:, 1:-1]
    flux[:, 1:-1] = vi * np.where(vi > 0, u[:, :-1], u[:, 1:])
    return flux


def diffusion_factor(grid, sigma, dt):
    c = dt * sigma / grid.h**2
    diag = np.full(grid.M, 1.0 + 2.0 * c)
    diag[0] = diag[-1] = 1.0 + c
    off = np.full(grid.M - 1, -c)
    return TridiagonalFactor(off, diag, off)


def step(state, cfg, p, grid, op=None, vel=None):
    """Advance ``state`` by ``cfg.dt``; returns a new :class:`State`."""
    u = state.u
    if vel is None:
        vel = velocity(state, p, grid, cfg.backend, op)
    dt = cfg.dt
    flux = upwind_flux(u, vel.v)
    explicit = u + dt * (-(flux[:, 1:] - flux[:, :-1]) / grid.h + reaction(u, p))
    new = diffusion_factor(grid, p.sigma, dt).solve(explicit)
    # no-flux diffusion maps a constant row to itself; keep it bit-exact
    flat = np.ptp(explicit, axis=1) == 0
    if np.any(flat):
        new[flat] = explicit[flat]
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(f"non-finite density at t={state.t + dt:.6g}")
    low = float(new.min())
    if low < -CLAMP_TOL:
        raise PositivityLoss(f"density {low:.3g} at t={state.t + dt:.6g}; dt={dt:.3g} too large")
    if low < 0:
        new = np.maximum(new, 0.0)
    return State(new, state.t + dt)


@dataclass
class Trajectory:
    """Output states, diagnostics rows and the accepted step sizes."""

    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    dts: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]

    @property
    def steps(self):
        return len(self.dts)


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything :func:`simulate` needs: grid, validated params and initial data.

    ``output_every = 0`` records every step.
    """

    grid: object
    params: object
    u0: np.ndarray
    T: float
    dt_max: float = math.inf
    output_every: float = 0.0
    backend: str = "nonlocal"

    def __post_init__(self):
        u0 = np.array(self.u0, dtype=float).reshape(self.params.n, -1)
        if u0.shape[1] != self.grid.M:
            raise ConfigurationError(f"initial data has {u0.shape[1]} cells, grid has {self.grid.M}")
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if (self.backend == "local") != (self.params.eps == 0):
            raise ConfigurationError("the local backend goes with eps = 0 and only with it")
        if not self.T >= 0 or not self.dt_max > 0 or self.output_every < 0:
            raise ConfigurationError("need T >= 0, dt_max > 0, output_every >= 0")

    def with_(self, **kw):
        from dataclasses import replace

        return replace(self, **kw)


def output_times(T, every):
    if T == 0:
        return [0.0]
    if every <= 0:
        return None
    k = int(math.floor(T / every * (1 + 1e-12)))
    times = [i * every for i in range(k + 1)]
    if T - times[-1] > 1e-12 * max(T, 1.0):
        times.append(T)
    else:
        times[-1] = T
    return times


def simulate(problem, monitor=None, on_step=None, diagnostics=True):
    """Integrate ``problem`` from ``u0`` to ``T`` with ``dt = stable_dt``.

    ``monitor(state, record)`` runs at every output time and may raise;
    ``on_step(old, new, dt)`` runs after every accepted step.  Errors carry the
    partial trajectory in ``exc.partial``.
    """
    from .entropy import Diagnostician

    grid, p = problem.grid, problem.params
    op = velocity_operator(grid, p, problem.backend)
    diag = Diagnostician(grid, p, problem.backend) if diagnostics else None
    traj = Trajectory()
    state = State(problem.u0, 0.0)
    times = output_times(problem.T, problem.output_every)
    next_out = 1

    def emit(s):
        rec = diag.record(s) if diag is not None else None
        traj.states.append(s)
        if rec is not None:
            traj.diagnostics.append(rec)
        if monitor is not None:
            monitor(s, rec)

    try:
        emit(state)
        while state.t < problem.T:
            vel = velocity(state, p, grid, problem.backend, op)
            dt = stable_dt(state, vel, p, grid.h, problem.dt_max)
            target = times[next_out] if times is not None else problem.T
            landing = state.t + dt >= target - 1e-12 * max(1.0, target)
            if landing:
                dt = target - state.t
            new = step(state, StepConfig(dt, problem.backend), p, grid, op, vel)
            if landing:
                new = State(new.u, target)
                next_out += 1
            if on_step is not None:
                on_step(state, new, dt)
            traj.dts.append(dt)
            state = new
            if landing or times is None:
                emit(state)
    except SimulationError as exc:
        if exc.partial is None:
            exc.partial = traj
        raise
    log.info("simulated to T=%g in %d steps", problem.T, traj.steps)
    return traj


# --- initial profiles ---------------------------------------------------------


def _per_species(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise ConfigurationError(f"{name} needs 1 or {n} values, got {arr.size}")
    return arr


def initial_profile(grid, n, kind, **kw):
    """Nonnegative initial data of shape ``(n, M)``.

    kinds: ``constant`` (value), ``gaussian`` (base, amplitude, center, width),
    ``step`` (left, right, position) and ``table`` (x, values: interpolated).
    """
    x = grid.centers
    mid = 0.5 * (grid.x_left + grid.x_right)
    if kind == "constant":
        val = _per_species(kw.get("value", 1.0), n, "value")
        u = np.repeat(val[:, None], grid.M, axis=1)
    elif kind == "gaussian":
        base = _per_species(kw.get("base", 0.0), n, "base")
        amp = _per_species(kw.get("amplitude", 1.0), n, "amplitude")
        cen = _per_species(kw.get("center", mid), n, "center")
        wid = _per_species(kw.get("width", 0.1 * grid.length), n, "width")
        if np.any(wid <= 0):
            raise ConfigurationError("gaussian width must be positive")
        u = base[:, None] + amp[:, None] * np.exp(-0.5 * ((x[None, :] - cen[:, None]) / wid[:, None]) ** 2)
    elif kind == "step":
        left = _per_species(kw.get("left", 1.0), n, "left")
        right = _per_species(kw.get("right", 0.0), n, "right")
        pos = _per_species(kw.get("position", mid), n, "position")
        u = np.where(x[None, :] < pos[:, None], left[:, None], right[:, None])
    elif kind == "table":
        xs = np.asarray(kw["x"], dtype=float)
        vals = np.asarray(kw["values"], dtype=float).reshape(n, -1)
        if vals.shape[1] != xs.size or np.any(np.diff(xs) <= 0):
            raise ConfigurationError("tabulated profile needs increasing x and one value row per species")
        u = np.vstack([np.interp(x, xs, row) for row in vals])
    else:
        raise ConfigurationError(f"unknown initial profile {kind!r}")
    if not np.all(np.isfinite(u)) or np.any(u < 0):
        raise ConfigurationError("initial data must be finite and nonnegative")
    return u
