import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brinkman_xdiff.core import Grid1D, make_grid
from brinkman_xdiff.elliptic import (
    COTH2_BOUND,
    IDENTITY_TOLERANCES,
    GreenKernel,
    analytic_errors,
    apply_K,
    apply_L,
    assemble,
    cell_dot,
    face_dot,
    gradient,
    green_derivative_bound_check,
    green_solve,
    green_tridiagonal_gap,
    identity_violations,
    observed_orders,
    operator_suite,
)
from brinkman_xdiff.errors import ConfigurationError, DomainMismatch, GridMismatch
from brinkman_xdiff.tridiag import TridiagonalFactor, solve_tridiagonal


def dense_gauss(m, b):
    """Plain Gaussian elimination without pivoting (fine for SPD matrices)."""
    a = np.array(m, dtype=float)
    x = np.array(b, dtype=float)
    n = len(x)
    for k in range(n):
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


# --- tridiagonal solver --------------------------------------------------------


def test_thomas_against_dense():
    rng = np.random.default_rng(0)
    m = 12
    lower, upper = rng.uniform(-1, 0, m - 1), rng.uniform(-1, 0, m - 1)
    diag = 3 + rng.uniform(0, 1, m)
    rhs = rng.normal(size=m)
    f = TridiagonalFactor(lower, diag, upper)
    np.testing.assert_allclose(f.solve(rhs), np.linalg.solve(f.dense(), rhs), rtol=1e-12)
    np.testing.assert_allclose(f.matvec(f.solve(rhs)), rhs, atol=1e-12)


def test_thomas_batched_rows():
    rng = np.random.default_rng(1)
    off = -np.ones(7)
    diag = np.full(8, 3.0)
    rhs = rng.normal(size=(3, 8))
    x = solve_tridiagonal(off, diag, off, rhs)
    for row, r in zip(x, rhs):
        np.testing.assert_allclose(row, solve_tridiagonal(off, diag, off, r), rtol=0, atol=0)


def test_thomas_m_matrix_keeps_sign():
    rng = np.random.default_rng(2)
    m = 50
    c = rng.uniform(0, 100)
    off = np.full(m - 1, -c)
    diag = np.full(m, 1 + 2 * c)
    rhs = rng.uniform(0, 1, m) * (rng.uniform(size=m) > 0.5)
    assert np.all(solve_tridiagonal(off, diag, off, rhs) >= 0)


def test_thomas_rejects_bad_shapes():
    with pytest.raises(ValueError):
        TridiagonalFactor(np.ones(2), np.ones(2), np.ones(1))


# --- assembly ------------------------------------------------------------------


def test_face_operator_uniform_diagonal():
    # three interior faces with h = 1, eps = 1
    op = assemble(make_grid(0, 4, 4), 1.0, "face")
    np.testing.assert_array_equal(op.diag, [3, 3, 3])
    np.testing.assert_array_equal(op.offdiag, [-1, -1])
    op = assemble(make_grid(0, 3, 3), 0.5, "face")
    np.testing.assert_array_equal(op.diag, [2, 2])
    np.testing.assert_array_equal(op.offdiag, [-0.5])


def test_cell_operator_boundary_rows():
    # ghost reflection adds eps/h^2 to the wall rows
    op = assemble(make_grid(0, 3, 3), 1.0, "cell")
    np.testing.assert_array_equal(op.diag, [4, 3, 4])
    np.testing.assert_array_equal(op.offdiag, [-1, -1])


@pytest.mark.parametrize("stagger", ["cell", "face"])
def test_assembled_matrix_symmetric_and_spd(stagger):
    op = assemble(make_grid(-1, 1, 17), 0.03, stagger)
    a = op.matrix()
    assert np.array_equal(a, a.T)
    lam, _ = op.spectral()
    assert lam.min() >= 1 - 1e-12


def test_assemble_cache_and_errors():
    g = make_grid(-1, 1, 10)
    assert assemble(g, 0.1) is assemble(make_grid(-1, 1, 10), 0.1)
    with pytest.raises(ConfigurationError):
        assemble(g, 0.0)
    with pytest.raises(ConfigurationError):
        assemble(g, 0.1, "vertex")
    with pytest.raises(GridMismatch):
        apply_L(assemble(g, 0.1), np.ones(9))


# --- L and K -------------------------------------------------------------------


def test_zero_source():
    op = assemble(make_grid(-1, 1, 16), 1.0)
    assert np.all(apply_L(op, np.zeros(16)) == 0)
    assert np.all(apply_K(op, np.zeros(16)) == 0)


def test_apply_L_matches_dense_oracle():
    rng = np.random.default_rng(4)
    op = assemble(make_grid(-1, 1, 8), 0.7)
    g = rng.normal(size=8)
    np.testing.assert_allclose(apply_L(op, g), dense_gauss(op.matrix(), g), atol=1e-10)


def test_analytic_solution_centre_and_order():
    sizes = (32, 64, 128, 256)
    orders = observed_orders(sizes, analytic_errors(sizes))
    assert np.all(np.abs(orders - 2.0) <= 0.2)
    grid = make_grid(-1, 1, 256)
    v = apply_L(assemble(grid, 1.0), np.ones(256))
    centre = 0.5 * (v[127] + v[128])
    assert centre == pytest.approx(1 - 1 / math.cosh(1), abs=1e-4)
    assert 1 - 1 / math.cosh(1) == pytest.approx(0.35195, abs=5e-6)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([8, 33, 64]), st.sampled_from([1.0, 0.1, 0.01]), st.integers(0, 2**32 - 1))
def test_resolvent_identities_hold(m, eps, seed):
    g = np.random.default_rng(seed).normal(size=m) * 5
    viol = identity_violations(make_grid(-1, 1, m), eps, g)
    for name, tol in IDENTITY_TOLERANCES.items():
        assert viol[name] <= tol, name


def test_L_inner_product_equals_K_norm():
    rng = np.random.default_rng(5)
    grid = make_grid(-1, 1, 40)
    op = assemble(grid, 0.2)
    g = rng.normal(size=40)
    lhs = cell_dot(grid, g, apply_L(op, g))
    kg = apply_K(op, g)
    assert abs(lhs - cell_dot(grid, kg, kg)) <= 1e-9 * (1 + abs(lhs))


def test_K_batched_rows():
    rng = np.random.default_rng(6)
    op = assemble(make_grid(-1, 1, 20), 0.05)
    g = rng.normal(size=(3, 20))
    kg = apply_K(op, g)
    for row, r in zip(kg, g):
        np.testing.assert_allclose(row, apply_K(op, r), atol=1e-14)


# --- gradients -----------------------------------------------------------------


def test_gradient_of_constant_noflux():
    grid = make_grid(0, 1, 6)
    assert np.all(gradient(grid, np.full(6, 3.2), "noflux") == 0)


def test_gradient_of_centers():
    grid = make_grid(-1, 1, 10)
    g = gradient(grid, grid.centers, "noflux")
    np.testing.assert_allclose(g[1:-1], 1.0, atol=1e-13)
    assert g[0] == 0 and g[-1] == 0


def test_gradient_dirichlet_boundary_against_one_sided_oracle():
    # w vanishing at the walls: the reflected ghost gives 2 w_0 / h at the left
    # face, the one-sided second-order stencil through (x_L, 0), x_0, x_1 gives
    # (9 w_0 - w_1) / (3 h); both equal w'(x_L) exactly for linear w.
    grid = make_grid(0, 1, 8)
    x = grid.centers
    w = 2.5 * x
    g = gradient(grid, w, "dirichlet0")
    h = grid.h
    oracle = (9 * w[0] - w[1]) / (3 * h)
    assert g[0] == pytest.approx(oracle, rel=1e-12)
    assert g[0] == pytest.approx(2.5, rel=1e-12)
    wr = 2.5 * (1 - x)
    gr = gradient(grid, wr, "dirichlet0")
    assert gr[-1] == pytest.approx(-(9 * wr[-1] - wr[-2]) / (3 * h), rel=1e-12)


def test_gradient_unknown_bc():
    with pytest.raises(ConfigurationError):
        gradient(make_grid(0, 1, 4), np.zeros(4), "periodic")


def test_face_dot_weights():
    grid = make_grid(0, 1, 4)
    assert face_dot(grid, np.ones(5), np.ones(5)) == pytest.approx(1.0)


# --- kernel backend ----------------------------------------------------------


def test_kernel_centre_value():
    assert abs(GreenKernel(1.0).dU_ds(0.0, 0.0) - 0.5) <= 1e-12
    assert math.sinh(1) * math.cosh(1) / math.sinh(2) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("eps", [1.0, 0.04, 1e-4])
def test_kernel_vanishes_at_walls(eps):
    k = GreenKernel(eps)
    s = np.linspace(-0.99, 0.99, 21)
    assert np.max(np.abs(k.dU_ds(-1.0, s))) <= 1e-12
    assert np.max(np.abs(k.dU_ds(1.0, s))) <= 1e-12
    assert np.all(np.isfinite(k.dU_ds(s[:, None], s[None, :])))


def test_kernel_U_solves_the_equation():
    # -eps U'' + U = delta: away from x = s the finite-difference residual vanishes
    eps = 0.3
    k = GreenKernel(eps)
    s, dx = 0.2, 1e-4
    for x in (-0.6, 0.7):
        upp = (k.U(x + dx, s) - 2 * k.U(x, s) + k.U(x - dx, s)) / dx**2
        assert abs(-eps * upp + k.U(x, s)) <= 1e-4


def test_F_continuous_and_integrates_to_one():
    k = GreenKernel(1.0)
    s = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(k.F(s, s), k.F(s + 1e-12, s), atol=1e-9)
    x = np.linspace(-1, 1, 4001)
    for si in s:
        vals = k.F(x, si)
        assert np.trapezoid(vals, x) == pytest.approx(1.0, abs=1e-6)


def test_F_only_for_unit_eps():
    with pytest.raises(ConfigurationError):
        GreenKernel(0.5).F(0.0, 0.0)


def test_green_solve_zero_and_domain():
    grid = make_grid(-1, 1, 16)
    assert np.all(green_solve(grid, np.zeros(16), 1.0) == 0)
    with pytest.raises(DomainMismatch):
        green_solve(make_grid(0, 1, 16), np.ones(16), 1.0)


def test_green_matches_tridiagonal_at_first_order():
    sizes = (32, 64, 128, 256)
    gaps = green_tridiagonal_gap(sizes, 1.0)
    assert np.all(np.diff(gaps) < 0)
    slope = -np.polyfit(np.log(sizes), np.log(gaps), 1)[0]
    assert slope >= 1.0


def test_derivative_bound_constant_and_zero():
    grid = Grid1D(-1.0, 1.0, 200)
    rep = green_derivative_bound_check(grid, np.zeros(200))
    assert rep.lhs == 0 and rep.passed
    rep = green_derivative_bound_check(grid, np.ones(200))
    assert rep.lhs <= 2.53731 * 2
    assert COTH2_BOUND == pytest.approx(2.53731, abs=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivative_bound_random_profiles(seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 1, 96) ** rng.uniform(0.3, 5)
    assert green_derivative_bound_check(Grid1D(-1.0, 1.0, 96), u).passed


def test_derivative_matches_finite_difference_of_v():
    grid = Grid1D(-1.0, 1.0, 400)
    u = 1 + np.sin(2 * grid.centers)
    rep = green_derivative_bound_check(grid, u)
    fd = np.gradient(rep.v, grid.h)
    assert np.max(np.abs(fd[5:-5] - rep.dv[5:-5])) <= 0.05


def test_operator_suite_passes():
    rows = operator_suite()
    assert all(r[3] for r in rows), [r for r in rows if not r[3]]
