"""Exit criteria for the package, each at its stated tolerance and time budget."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from brinkman_xdiff.cli import dispatch
from brinkman_xdiff.config import build_problem, parse_config
from brinkman_xdiff.core import Grid1D, ModelParams, make_grid, validate_params
from brinkman_xdiff.dynamics import Problem, initial_profile, reaction, simulate
from brinkman_xdiff.elliptic import (
    GreenKernel,
    analytic_errors,
    green_derivative_bound_check,
    green_tridiagonal_gap,
    identity_violations,
    observed_orders,
)
from brinkman_xdiff.entropy import cutoff_inequality_suite
from brinkman_xdiff.experiments import run_decay, run_decay_diagonal, run_localization, run_stability

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    cfg = parse_config(CONFIGS / name)
    return cfg, build_problem(cfg)


def test_criterion_01_operator_identities(acceptance_line):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {"K(K(g))=L(g)": -math.inf, "energy": -math.inf, "contraction": -math.inf}
    for m in (64, 256):
        grid = make_grid(-1, 1, m)
        for eps in (1.0, 0.01):
            for _ in range(20):
                g = rng.normal(size=m) * rng.uniform(0.1, 10)
                viol = identity_violations(grid, eps, g)
                for key in worst:
                    worst[key] = max(worst[key], viol[key])
    elapsed = time.perf_counter() - start
    ok = worst["K(K(g))=L(g)"] <= 1e-9 and worst["energy"] <= 1e-8 and worst["contraction"] <= 1e-12 and elapsed < 10
    detail = ", ".join(f"{k}={v:.3g}" for k, v in worst.items()) + f", {elapsed:.2f}s"
    acceptance_line(1, "operator identity suite", ok, detail)
    assert ok


def test_criterion_02_analytic_solve(acceptance_line):
    start = time.perf_counter()
    sizes = (32, 64, 128, 256)
    errors = analytic_errors(sizes)
    orders = observed_orders(sizes, errors)
    elapsed = time.perf_counter() - start
    ok = bool(np.all(np.diff(errors) < 0) and np.all(np.abs(orders - 2.0) <= 0.2) and elapsed < 1)
    acceptance_line(2, "analytic elliptic solve", ok, f"orders={np.round(orders, 4).tolist()}, {elapsed:.3f}s")
    assert ok


def test_criterion_03_kernel(acceptance_line):
    start = time.perf_counter()
    centre = abs(float(GreenKernel(1.0).dU_ds(0.0, 0.0)) - 0.5)
    sizes = (32, 64, 128, 256)
    gaps = green_tridiagonal_gap(sizes, 1.0)
    order = -np.polyfit(np.log(sizes), np.log(gaps), 1)[0]
    grid = Grid1D(-1.0, 1.0, 128)
    rng = np.random.default_rng(7)
    worst = -math.inf
    all_pass = True
    for _ in range(100):
        u = rng.uniform(0, 1, grid.M) ** rng.uniform(0.3, 5) * rng.uniform(0.1, 10)
        rep = green_derivative_bound_check(grid, u, margin=1e-6)
        worst = max(worst, rep.lhs / rep.rhs if rep.rhs > 0 else 0.0)
        all_pass &= rep.passed
    elapsed = time.perf_counter() - start
    ok = centre <= 1e-12 and bool(np.all(np.diff(gaps) < 0)) and order >= 1.0 and all_pass and elapsed < 30
    detail = f"|dU/ds(0,0)-0.5|={centre:.2g}, gap order={order:.5f}, max ||v'||/bound={worst:.4f}, {elapsed:.2f}s"
    acceptance_line(3, "kernel backend", ok, detail)
    assert ok


def _random_two_species(rng):
    grid = make_grid(-1, 1, int(rng.choice([64, 128])))
    m = rng.uniform(-1, 1, (2, 2))
    a = m @ m.T + rng.uniform(0.1, 1.0) * np.eye(2)
    b = np.diag(rng.uniform(0.5, 2.0, 2)) + rng.uniform(0, 0.5) * (1 - np.eye(2))
    p = validate_params(ModelParams(2, a, rng.uniform(0, 2, 2), b, rng.uniform(0.05, 0.5), 10 ** rng.uniform(-2, 0)))
    centres = rng.uniform(-0.6, 0.6, 2)
    u0 = initial_profile(grid, 2, "gaussian", base=rng.uniform(0, 0.5, 2), amplitude=rng.uniform(0.2, 2, 2), center=centres, width=rng.uniform(0.1, 0.4, 2))
    u0 *= rng.uniform(size=u0.shape) > 0.1  # some cells start empty
    return Problem(grid, p, u0, 1.0, output_every=0.5)


def test_criterion_04_positivity_and_mass(acceptance_line):
    start = time.perf_counter()
    rng = np.random.default_rng(44)
    worst_mass, min_u, steps = 0.0, math.inf, 0
    for _ in range(10):
        pb = _random_two_species(rng)
        h = pb.grid.h

        def on_step(old, new, dt):
            nonlocal worst_mass, min_u, steps
            mass_old = h * old.u.sum(axis=1)
            mass_new = h * new.u.sum(axis=1)
            source = dt * h * reaction(old.u, pb.params).sum(axis=1)
            excess = np.abs(mass_new - mass_old - source) / (1e-12 * (1 + mass_old))
            worst_mass = max(worst_mass, float(excess.max()))
            min_u = min(min_u, float(new.u.min()))
            steps += 1

        simulate(pb, on_step=on_step, diagnostics=False)
    elapsed = time.perf_counter() - start
    ok = min_u >= 0 and worst_mass <= 1.0 and elapsed < 60
    detail = f"min u={min_u:.3g}, max mass defect/tol={worst_mass:.3g}, {steps} steps, {elapsed:.2f}s"
    acceptance_line(4, "positivity and mass", ok, detail)
    assert ok


def test_criterion_05_entropy_dissipation(acceptance_line):
    start = time.perf_counter()
    grid = make_grid(-1, 1, 256)
    p = validate_params(ModelParams(2, [[2, 1], [1, 2]], [0, 0], np.diag([1e-12, 1e-12]), 0.1, 0.01, reaction=False))
    u0 = initial_profile(grid, 2, "gaussian", base=0.2, amplitude=[1.0, 0.8], center=[-0.3, 0.3], width=0.2)
    traj = simulate(Problem(grid, p, u0, 1.0, output_every=0.0))
    h1 = np.array([r.H1 for r in traj.diagnostics])
    worst = float(np.max(np.diff(h1)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 30
    acceptance_line(5, "entropy dissipation", ok, f"max H1 increase={worst:.3g} over {traj.steps} steps, {elapsed:.2f}s")
    assert ok


def test_criterion_06_decay(acceptance_line):
    start = time.perf_counter()
    cfg, pb = load("decay.conf")
    rep = run_decay(pb, mu=cfg.experiment["mu"])
    ratio = float(np.max(rep.values / (rep.values[0] * np.exp(-2.0 * rep.times))))
    elapsed = time.perf_counter() - start
    ok = rep.bound_rate == pytest.approx(2.0) and ratio <= 1.05 and rep.fitted_rate >= 1.9 and elapsed < 30
    detail = f"max H/(H0 e^-2t)={ratio:.6f}, fitted rate={rep.fitted_rate:.4f}, {elapsed:.2f}s"
    acceptance_line(6, "relative entropy decay", ok, detail)
    assert ok


def test_criterion_07_diagonal_decay(acceptance_line):
    start = time.perf_counter()
    _, pb = load("decay_diagonal.conf")
    rep = run_decay_diagonal(pb)
    increase = float(np.max(np.diff(rep.values)))
    elapsed = time.perf_counter() - start
    ok = pb.u0.min() == 0 and rep.verdicts[0].passed and elapsed < 30
    detail = f"min u0={pb.u0.min():g}, max H1_rel increase={increase:.3g}, fitted rate={rep.fitted_rate:.4f}, {elapsed:.2f}s"
    acceptance_line(7, "diagonal decay", ok, detail)
    assert ok


def test_criterion_08_localization(acceptance_line):
    start = time.perf_counter()
    cfg, pb = load("sweep_eps.conf")
    eps_list = cfg.experiment["eps_list"]
    assert eps_list == [1e-1, 1e-2, 1e-3]
    rep = run_localization(pb, eps_list)
    e = rep.errors
    elapsed = time.perf_counter() - start
    ok = e[0] > e[1] > e[2] and e[2] <= 0.2 * e[0] and elapsed < 120
    acceptance_line(8, "localization limit", ok, f"errors={[f'{x:.4g}' for x in e]}, last/first={e[2] / e[0]:.4f}, {elapsed:.2f}s")
    assert ok


def test_criterion_09_stability(acceptance_line):
    start = time.perf_counter()
    cfg, pb = load("stability.conf")
    delta = cfg.experiment["delta"]
    rep = run_stability(pb, delta)
    zero = float(np.max(rep.h2_rel_zero))
    half = run_stability(pb, 0.5 * delta)
    ratio = rep.h2_rel[0] / half.h2_rel[0]
    elapsed = time.perf_counter() - start
    ok = zero <= 1e-12 and abs(ratio / 4 - 1) <= 1e-6 and elapsed < 60
    acceptance_line(9, "stability", ok, f"max H2_rel(delta=0)={zero:.3g}, H2_rel(0) ratio={ratio:.10f}, {elapsed:.2f}s")
    assert ok


def test_criterion_10_cutoff_inequalities(acceptance_line):
    start = time.perf_counter()
    rep = cutoff_inequality_suite(10_000, seed=10, slack=1e-9)
    elapsed = time.perf_counter() - start
    ok = rep.passed and elapsed < 10
    acceptance_line(10, "cutoff inequalities", ok, f"violations={rep.violations}, {elapsed:.2f}s")
    assert ok


def test_criterion_11_determinism(acceptance_line, tmp_path, capsys):
    outs = [tmp_path / "run1", tmp_path / "run2"]
    codes = [dispatch(["decay", "--config", str(CONFIGS / "decay.conf"), "--out", str(o)]) for o in outs]
    capsys.readouterr()
    first, second = ((o / "diagnostics.csv").read_bytes() for o in outs)
    ok = codes == [0, 0] and first == second and len(first) > 0
    acceptance_line(11, "determinism", ok, f"exit codes={codes}, diagnostics.csv {len(first)} bytes, identical={first == second}")
    assert ok
