"""Scripted runs probing decay, localization, stability and boundedness, each ending in verdicts.

Every experiment returns a report with ``verdicts`` (list of :class:`Verdict`),
``table()`` (header and rows for ``<name>.csv``) and ``trajectory`` (the main
run, whose diagnostics go to ``diagnostics.csv``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import State, lotka_volterra_rates, make_grid, steady_state, validate_params
from .dynamics import (
    Problem,
    StepConfig,
    Trajectory,
    initial_profile,
    output_times,
    simulate,
    stable_dt,
    step,
    velocity,
    velocity_operator,
)
from .elliptic import assemble
from .entropy import Diagnostician, h1_relative, h2_relative
from .errors import ConfigurationError, FitDegenerate, HypothesisViolated, LockstepViolation, SimulationError

FIT_FLOOR = 1e-14


@dataclass(frozen=True)
class Verdict:
    criterion: str
    passed: bool
    measured: float
    bound: float

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.criterion} measured={self.measured:.10g} bound={self.bound:.10g}"


def fit_decay_rate(times, values, floor=FIT_FLOOR, tail=0.5):
    """Least-squares decay rate of ``log(values)`` over the last ``tail`` of the usable samples."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > floor
    if ok.sum() < 5:
        raise FitDegenerate(f"only {int(ok.sum())} samples above {floor:g}")
    t, v = times[ok], values[ok]
    start = int(math.floor(len(t) * (1.0 - tail)))
    t, v = t[start:], v[start:]
    slope = np.polyfit(t, np.log(v), 1)[0]
    return float(-slope)


def _steady(p):
    ss = steady_state(p)
    if np.any(ss.u_inf <= 0):
        raise HypothesisViolated("u_inf > 0", 0.0)
    return ss


# --- large-time decay ---------------------------------------------------------


@dataclass
class DecayFit:
    times: np.ndarray
    values: np.ndarray
    fitted_rate: float
    bound_rate: float
    passed: bool
    verdicts: list = field(default_factory=list)
    trajectory: Trajectory | None = None
    name: str = "decay"

    def table(self):
        header = ["t", "H1_rel", "bound"]
        bound = self.values[0] * np.exp(-self.bound_rate * self.times) if self.bound_rate > 0 else np.full_like(self.times, np.nan)
        return header, [[t, v, b] for t, v, b in zip(self.times, self.values, bound)]


def _series(traj):
    return np.array([r.t for r in traj.diagnostics]), np.array([r.H1_rel for r in traj.diagnostics])


def run_decay(problem, mu=None, tol=5e-2):
    """Exponential decay of the relative entropy at rate ``2 beta mu``.

    ``beta`` comes from the competition matrix; ``mu`` defaults to the
    smallest of ``u0`` and ``u_inf`` and is checked against both.  The
    hypotheses ``u >= mu`` and ``f(u) <= 0`` are monitored at every output.
    """
    p = problem.params
    ss = _steady(p)
    if not ss.beta > 0:
        raise HypothesisViolated(f"competition matrix positive definite (beta={ss.beta:.6g})", 0.0)
    u0_min = float(problem.u0.min())
    if mu is None:
        mu = min(u0_min, float(ss.u_inf.min()))
    if not mu > 0:
        raise HypothesisViolated(f"mu > 0 (mu={mu:.6g})", 0.0)
    if float(ss.u_inf.min()) < mu:
        raise HypothesisViolated(f"u_inf >= mu (min u_inf={ss.u_inf.min():.6g}, mu={mu:.6g})", 0.0)
    slack = 1e-12

    def monitor(state, rec):
        low = float(state.u.min())
        if low < mu - slack * (1 + mu):
            raise HypothesisViolated(f"u >= mu (min u={low:.6g}, mu={mu:.6g})", state.t)
        f_max = float(lotka_volterra_rates(state.u, p).max())
        if f_max > slack:
            raise HypothesisViolated(f"f(u) <= 0 (max f={f_max:.6g})", state.t)

    traj = simulate(problem, monitor=monitor)
    times, values = _series(traj)
    rate = 2.0 * ss.beta * mu
    if values[0] <= FIT_FLOOR:
        fitted = math.inf
        worst = 0.0
    else:
        fitted = fit_decay_rate(times, values)
        worst = float(np.max(values / (values[0] * np.exp(-rate * times))))
    verdicts = [
        Verdict("decay_bound", worst <= 1 + tol, worst, 1 + tol),
        Verdict("decay_rate", fitted >= rate * (1 - tol), fitted, rate * (1 - tol)),
    ]
    return DecayFit(times, values, fitted, rate, all(v.passed for v in verdicts), verdicts, traj)


def run_decay_diagonal(problem, tol=1e-12):
    """Decay without a density floor when the competition matrix is diagonal.

    Checks that the relative entropy never increases and reports the fitted
    rate as an empirical estimate; no log-Sobolev constant is assumed.
    """
    p = problem.params
    if np.any(p.b[~np.eye(p.n, dtype=bool)] != 0):
        raise HypothesisViolated("competition matrix is diagonal", 0.0)
    if np.any(p.b0 <= 0) or np.any(np.diag(p.b) <= 0) or not p.reaction:
        raise HypothesisViolated("b_i0 > 0 and b_ii > 0 with reactions on", 0.0)
    traj = simulate(problem)
    times, values = _series(traj)
    increase = float(np.max(np.diff(values))) if len(values) > 1 else 0.0
    allowed = tol * (1.0 + values[0])
    if values[0] <= FIT_FLOOR:
        fitted = math.inf
    else:
        fitted = fit_decay_rate(times, values)
    verdicts = [
        Verdict("decay_diagonal_monotone", increase <= allowed, max(increase, 0.0), allowed),
        Verdict("decay_diagonal_rate_positive", fitted > 0, fitted, 0.0),
    ]
    return DecayFit(times, values, fitted, math.nan, all(v.passed for v in verdicts), verdicts, traj, "decay-diagonal")


# --- lockstep integration -----------------------------------------------------


def lockstep(problems, states=None, times=None, with_diagnostics=True):
    """Advance several problems on one grid with a shared step size.

    Each step uses the smallest :func:`stable_dt` of all runs, so states are
    compared at identical times.  Returns one :class:`Trajectory` per problem;
    only the first one carries diagnostics.
    """
    first = problems[0]
    grid, T = first.grid, first.T
    for pb in problems[1:]:
        if not pb.grid.same_as(grid) or pb.T != T:
            raise ConfigurationError("lockstep runs need the same grid and final time")
    if states is None:
        states = [State(pb.u0, 0.0) for pb in problems]
    if times is None:
        times = output_times(T, first.output_every)
        if times is None:
            times = [0.0, T]
    ops = [velocity_operator(grid, pb.params, pb.backend) for pb in problems]
    diag = Diagnostician(grid, first.params, first.backend) if with_diagnostics else None
    trajs = [Trajectory() for _ in problems]
    dt_cap = min(pb.dt_max for pb in problems)

    def emit():
        for tr, s in zip(trajs, states):
            tr.states.append(s)
        if diag is not None:
            trajs[0].diagnostics.append(diag.record(states[0]))

    emit()
    k = 1
    try:
        while k < len(times):
            target = times[k]
            vels = [velocity(s, pb.params, grid, pb.backend, op) for s, pb, op in zip(states, problems, ops)]
            dt = min(stable_dt(s, v, pb.params, grid.h, dt_cap) for s, v, pb in zip(states, vels, problems))
            landing = states[0].t + dt >= target - 1e-12 * max(1.0, target)
            if landing:
                dt = target - states[0].t
            new = []
            for s, v, pb, op in zip(states, vels, problems, ops):
                nxt = step(s, StepConfig(dt, pb.backend), pb.params, grid, op, v)
                new.append(State(nxt.u, target) if landing else nxt)
            if len({s.t for s in new}) != 1:
                raise LockstepViolation("runs drifted apart in time")
            for tr in trajs:
                tr.dts.append(dt)
            states = new
            if landing:
                emit()
                k += 1
    except SimulationError as exc:
        if exc.partial is None:
            exc.partial = trajs[0]
        raise
    return trajs


# --- localization limit -------------------------------------------------------


@dataclass
class SweepResult:
    eps_list: list
    errors: list
    velocity_errors: list
    order: float
    verdicts: list
    trajectory: Trajectory | None = None
    name: str = "sweep-eps"

    def table(self):
        return ["eps", "error_L2", "velocity_error_inf"], [
            [e, err, ve] for e, err, ve in zip(self.eps_list, self.errors, self.velocity_errors)
        ]


def local_reference(problem):
    p = problem.params
    from dataclasses import replace

    local = validate_params(replace(p, eps=0.0, alpha=None), local=True)
    return problem.with_(params=local, backend="local")


def run_localization(problem, eps_list, reduction=0.2, min_order=0.8):
    """Distance between nonlocal and local final states as eps decreases."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2 or any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps_list must be strictly decreasing and positive")
    from dataclasses import replace

    ref = local_reference(problem)
    runs = [problem.with_(params=validate_params(replace(problem.params, eps=e, alpha=None)), backend="nonlocal") for e in eps_list]
    trajs = lockstep([ref] + runs)
    grid = problem.grid
    u_ref = trajs[0].final.u
    errors = [math.sqrt(grid.h * float(np.sum((tr.final.u - u_ref) ** 2))) for tr in trajs[1:]]

    s0 = State(problem.u0)
    v0 = velocity(s0, ref.params, grid, "local").v
    vel_errors = [
        float(np.max(np.abs(velocity(s0, pb.params, grid, "nonlocal", velocity_operator(grid, pb.params, "nonlocal")).v - v0)))
        for pb in runs
    ]
    scale = max(errors)
    if scale <= 1e-14:
        decreasing, order, ratio = True, math.inf, 0.0
    else:
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        ratio = errors[-1] / errors[0]
        order = math.log(errors[0] / errors[-1]) / math.log(eps_list[0] / eps_list[-1]) if errors[-1] > 0 else math.inf
    worst_step = max((b / a for a, b in zip(errors, errors[1:]) if a > 0), default=0.0)
    verdicts = [
        Verdict("localization_monotone", decreasing, worst_step, 1.0),
        Verdict("localization_reduction", ratio <= reduction, ratio, reduction),
        Verdict("localization_order", order >= min_order, order, min_order),
    ]
    return SweepResult(eps_list, errors, vel_errors, order, verdicts, trajs[1])


# --- stability / uniqueness ---------------------------------------------------


def default_bump(grid, n):
    return initial_profile(grid, n, "gaussian", base=0.0, amplitude=1.0, width=0.1 * grid.length)


@dataclass
class StabilityReport:
    times: np.ndarray
    h2_rel: np.ndarray
    h2_rel_zero: np.ndarray
    quadratic_ratio: float
    c_fit: float
    verdicts: list
    trajectory: Trajectory | None = None
    name: str = "stability"

    def table(self):
        return ["t", "H2_rel", "H2_rel_delta0"], [list(r) for r in zip(self.times, self.h2_rel, self.h2_rel_zero)]


def run_stability(problem, delta, bump=None, zero_tol=1e-12, ratio_tol=1e-6):
    """Relative Rao entropy between two lockstep runs started ``delta`` apart."""
    if not delta > 0:
        raise ConfigurationError("stability run needs delta > 0")
    grid, p = problem.grid, problem.params
    if bump is None:
        bump = default_bump(grid, p.n)
    cell_op = assemble(grid, p.eps, "cell") if problem.backend == "nonlocal" else None

    def perturbed(d):
        return np.maximum(problem.u0 + d * bump, 0.0)

    def rel(a, b):
        return h2_relative(a, b, cell_op, p, grid)

    u0 = State(problem.u0)
    pair = lockstep([problem, problem.with_(u0=perturbed(delta))])
    zero = lockstep([problem, problem.with_(u0=perturbed(0.0))], with_diagnostics=False)
    times = np.array([s.t for s in pair[0].states])
    series = np.array([rel(a, b) for a, b in zip(pair[0].states, pair[1].states)])
    series_zero = np.array([rel(a, b) for a, b in zip(zero[0].states, zero[1].states)])
    h_full = rel(u0, State(perturbed(delta)))
    h_half = rel(u0, State(perturbed(0.5 * delta)))
    ratio = h_full / h_half if h_half > 0 else math.nan
    mask = times > 0
    if series[0] > 0 and np.all(series[mask] > 0):
        c_fit = float(np.max(np.log(series[mask] / series[0]) / times[mask])) if mask.any() else 0.0
    else:
        c_fit = math.nan
    zero_max = float(np.max(series_zero))
    verdicts = [
        Verdict("stability_delta0", zero_max <= zero_tol, zero_max, zero_tol),
        Verdict("stability_quadratic", abs(ratio / 4.0 - 1.0) <= ratio_tol, ratio, 4.0),
        Verdict("stability_gronwall_finite", math.isfinite(c_fit), c_fit, math.inf),
    ]
    return StabilityReport(times, series, series_zero, ratio, c_fit, verdicts, pair[0])


# --- boundedness --------------------------------------------------------------


@dataclass
class BoundednessReport:
    times: np.ndarray
    linf: np.ndarray
    sup_linf: np.ndarray
    cap: float
    verdicts: list
    trajectory: Trajectory | None = None
    name: str = "boundedness"

    def table(self):
        n = self.linf.shape[1]
        return ["t"] + [f"linf_{i + 1}" for i in range(n)], [[t, *row] for t, row in zip(self.times, self.linf)]


def run_boundedness(problem, slack=0.1):
    """Track ``max_x u_i`` and compare with the uniform logistic cap."""
    p = problem.params
    traj = simulate(problem)
    times = np.array([r.t for r in traj.diagnostics])
    linf = np.array([r.linf for r in traj.diagnostics])
    sup = linf.max(axis=0)
    cap = max(float(problem.u0.max()), float(np.max(p.b0 / np.diag(p.b))) if p.reaction else 0.0)
    measured = float(sup.max())
    finite = bool(np.all(np.isfinite(linf)))
    verdicts = [
        Verdict("boundedness_finite", finite, measured, math.inf),
        Verdict("boundedness_cap", finite and measured <= cap * (1 + slack), measured, cap * (1 + slack)),
    ]
    return BoundednessReport(times, linf, sup, cap, verdicts, traj)


def grid_for(problem, M):
    """Same problem on a grid with ``M`` cells; ``u0`` is resampled by interpolation."""
    g = problem.grid
    new = make_grid(g.x_left, g.x_right, M)
    u0 = np.vstack([np.interp(new.centers, g.centers, row) for row in problem.u0])
    return problem.with_(grid=new, u0=u0)
