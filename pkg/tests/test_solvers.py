"""Linear algebra, pseudo-Jacobian assembly, and the Newton loops.

The pseudo-Jacobian is validated against central finite differences of an
independently evaluated residual with the wave-speed bound held fixed at
the linearization state (the matrix deliberately omits the bound's own
state dependence, so the comparison freezes it too).
"""

import numpy as np
import pytest
import scipy.sparse as sp

from mppfv.fluxes import bar_states, low_order_flux_set
from mppfv.mesh import DIRICHLET, PERIODIC, CellField, StructuredGrid
from mppfv.solvers import (JacobianEngine, NonConvergenceError,
                           SolverReport, SparseBandedMatrix,
                           assemble_pseudo_jacobian, frozen_jacobian,
                           linear_solve, newton_low_order, newton_stage)
from mppfv.problems import ProblemSpec, burgers_1d, make_grid

from conftest import make_linear_advection_1d, make_pure_diffusion_1d
from test_fluxes import make_advection_2d, make_burgers_1d, _shaped


def freeze_speed_bound(spec, grid, state, t=0.0):
    """Replace the wave-speed policy with the per-face values it takes at
    ``state`` so finite differences see exactly what the matrix assumes."""
    lam = bar_states(state, spec, grid, t).lam_a

    def bound(axis, ua, ub, ra, rb, x, y, t):
        return lam[axis]

    return type(spec)(**{**spec.__dict__, "wave_speed_bound": bound})


def residual_fd_jacobian(u, spec, grid, dt, t=0.0, step=1e-7):
    """Central finite differences of r(u) = u - u0 + dt*div(G^L(u))
    column by column (u0 drops out of the derivative)."""
    n = u.size
    J = np.zeros((n, n))

    def divergence(v):
        return low_order_flux_set(v.reshape(grid.shape), spec, grid,
                                  t=t).divergence().ravel()

    flat = u.ravel()
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        plus = flat + e
        minus = flat - e
        J[:, j] = ((plus - minus) + dt * (divergence(plus)
                                          - divergence(minus))) / (2 * step)
    return J


class TestPseudoJacobian:
    def test_matches_finite_differences_nonlinear_1d(self, rng):
        base, grid = make_burgers_1d(16)
        spec = type(base)(**{
            **base.__dict__,
            "diffusion": lambda u, x, y: 0.01 + 0.02 * np.square(
                np.asarray(u, dtype=float)),
            "diffusion_derivative": lambda u, x, y: 0.04 * np.asarray(
                u, dtype=float),
        })
        u = 1.0 + 0.5 * np.sin(2 * np.pi * grid.axis_centers(0))
        dt = 0.03
        frozen = freeze_speed_bound(spec, grid, u)
        got = assemble_pseudo_jacobian(u, frozen, grid, dt).matrix.toarray()
        want = residual_fd_jacobian(u, frozen, grid, dt)
        scale = np.max(np.abs(want))
        assert np.max(np.abs(got - want)) / scale <= 1e-6

    def test_matches_finite_differences_2d_mixed_boundary(self, rng):
        base, grid = make_advection_2d(vel=(0.8, -0.6), shape=(5, 4),
                                       boundary=(PERIODIC, DIRICHLET))
        spec = type(base)(**{
            **base.__dict__,
            "diffusion": lambda u, x, y: _shaped(0.02, u, x, y),
        })
        u = rng.uniform(0.2, 0.8, grid.shape)
        dt = 0.05
        frozen = freeze_speed_bound(spec, grid, u)
        got = assemble_pseudo_jacobian(u, frozen, grid, dt).matrix.toarray()
        want = residual_fd_jacobian(u, frozen, grid, dt)
        scale = np.max(np.abs(want))
        assert np.max(np.abs(got - want)) / scale <= 1e-6

    def test_pure_upwind_rows(self):
        # f = u, c = 0, speed bound 1, dt = dx: each row is the first-order
        # upwind stencil (-1, 2, 0).
        spec, grid = make_linear_advection_1d(velocity=1.0, n=8,
                                              wave_speed=1.0)
        dt = grid.spacing[0]
        J = assemble_pseudo_jacobian(np.full(8, 0.5), spec, grid,
                                     dt).matrix.toarray()
        for i in range(8):
            assert J[i, i] == pytest.approx(2.0, abs=1e-14)
            assert J[i, (i - 1) % 8] == pytest.approx(-1.0, abs=1e-14)
            assert J[i, (i + 1) % 8] == pytest.approx(0.0, abs=1e-14)

    def test_pure_diffusion_gives_symmetric_tridiagonal(self):
        spec, grid = make_pure_diffusion_1d(coefficient=0.7, n=8)
        dt = 0.01
        h = grid.spacing[0]
        J = assemble_pseudo_jacobian(np.full(8, 0.3), spec, grid,
                                     dt).matrix.toarray()
        r = dt * 0.7 / h ** 2
        want = np.eye(8)
        for i in range(8):
            want[i, i] += 2 * r
            want[i, (i - 1) % 8] -= r
            want[i, (i + 1) % 8] -= r
        assert np.max(np.abs(J - want)) <= 1e-12

    def test_row_sums_one_for_linear_flux_without_diffusion(self):
        spec, grid = make_linear_advection_1d(velocity=1.0, n=10,
                                              wave_speed=2.0)
        J = assemble_pseudo_jacobian(np.linspace(0, 1, 10), spec, grid,
                                     0.04).matrix
        sums = np.asarray(J.sum(axis=1)).ravel()
        assert np.allclose(sums, 1.0, rtol=0, atol=1e-14)

    @pytest.mark.parametrize("make", [
        lambda: make_burgers_1d(9),
        lambda: make_burgers_1d(9, boundary=DIRICHLET),
        lambda: make_advection_2d(shape=(4, 5), boundary=(PERIODIC, DIRICHLET)),
    ])
    def test_structural_symmetry(self, make, rng):
        spec, grid = make()
        u = rng.uniform(0.1, 0.9, grid.shape)
        jac = assemble_pseudo_jacobian(u, spec, grid, 0.02)
        assert jac.is_structurally_symmetric()

    def test_frozen_jacobian_linearizes_at_half_range(self):
        spec = burgers_1d()
        grid = make_grid(spec, 40)
        frozen = frozen_jacobian(spec, grid, dt=0.01)
        # Initial data spans [0, 2]; the frozen state is the half-range 1.
        direct = assemble_pseudo_jacobian(np.full(40, 1.0), spec, grid, 0.01)
        assert np.max(np.abs((frozen.matrix - direct.matrix).toarray())) == 0.0


class TestLinearSolve:
    def _banded(self, rng, n=12):
        m = np.zeros((n, n))
        for i in range(n):
            m[i, i] = 4.0 + rng.uniform(0, 1)
            m[i, (i + 1) % n] = -1.0 + 0.1 * rng.uniform(0, 1)
            m[i, (i - 1) % n] = -1.0
        return m

    def test_identity_returns_rhs(self, rng):
        rhs = rng.standard_normal(7)
        assert np.allclose(linear_solve(np.eye(7), rhs), rhs, atol=1e-14)

    def test_three_input_types_agree_with_dense_oracle(self, rng):
        m = self._banded(rng)
        rhs = rng.standard_normal(12)
        want = np.linalg.solve(m, rhs)
        assert np.allclose(linear_solve(m, rhs), want, atol=1e-12)
        assert np.allclose(linear_solve(sp.csr_matrix(m), rhs), want,
                           atol=1e-12)
        banded = SparseBandedMatrix(12, sp.csr_matrix(m))
        assert np.allclose(linear_solve(banded, rhs), want, atol=1e-12)

    def test_tridiagonal_roundtrip(self, rng):
        n = 20
        m = (np.diag(np.full(n, 2.0)) + np.diag(np.full(n - 1, -1.0), 1)
             + np.diag(np.full(n - 1, -1.0), -1))
        x = rng.standard_normal(n)
        got = linear_solve(sp.csr_matrix(m), m @ x)
        assert np.max(np.abs(got - x)) <= 1e-10

    def test_periodic_corner_case_against_dense(self, rng):
        m = self._banded(rng, n=9)  # periodic corners filled
        rhs = rng.standard_normal(9)
        got = linear_solve(sp.csr_matrix(m), rhs)
        assert np.allclose(got, np.linalg.solve(m, rhs), atol=1e-12)

    def test_singular_matrix_raises(self):
        with pytest.raises(np.linalg.LinAlgError):
            linear_solve(np.zeros((4, 4)), np.ones(4))
        with pytest.raises(np.linalg.LinAlgError):
            linear_solve(sp.csr_matrix(np.zeros((4, 4))), np.ones(4))

    def test_residual_certificate(self, rng):
        m = self._banded(rng, n=30)
        rhs = rng.standard_normal(30)
        x = linear_solve(sp.csr_matrix(m), rhs)
        assert np.linalg.norm(m @ x - rhs) <= 1e-13 * np.linalg.norm(rhs)


class TestSparseBandedMatrix:
    def test_row_entries_and_matvec(self, rng):
        m = sp.csr_matrix(np.array([[2.0, -1.0, 0.0],
                                    [-1.0, 2.0, -1.0],
                                    [0.0, -1.0, 2.0]]))
        banded = SparseBandedMatrix(3, m)
        cols, vals = banded.row_entries(1)
        assert list(cols) == [0, 1, 2]
        assert list(vals) == [-1.0, 2.0, -1.0]
        v = rng.standard_normal(3)
        assert np.allclose(banded.matvec(v), m @ v, atol=1e-14)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            SparseBandedMatrix(4, sp.identity(3, format="csr"))

    def test_preconditioned_solve_matches_direct(self, rng):
        spec, grid = make_advection_2d(shape=(6, 5))
        spec = type(spec)(**{
            **spec.__dict__,
            "diffusion": lambda u, x, y: _shaped(0.01, u, x, y),
        })
        u = rng.uniform(0.2, 0.8, grid.shape)
        jac = assemble_pseudo_jacobian(u, spec, grid, 0.05)
        pre = frozen_jacobian(spec, grid, 0.05)
        rhs = rng.standard_normal(grid.num_cells)
        direct = jac.solve(rhs)
        iterated = jac.solve(rhs, preconditioner=pre)
        assert np.allclose(iterated, direct, atol=1e-10)


class TestSolverReport:
    def test_converged_report_must_meet_tolerance(self):
        with pytest.raises(ValueError):
            SolverReport(iterations=3, residual=1.0, converged=True,
                         tolerance=1e-12)
        ok = SolverReport(iterations=3, residual=1e-13, converged=True,
                          tolerance=1e-12)
        assert ok.converged


class TestNewtonLowOrder:
    def test_constant_state_converges_without_updates(self):
        spec, grid = make_burgers_1d(12)
        u, flux, report = newton_low_order(np.full(12, 0.8), spec, grid,
                                           dt=0.05)
        assert report.converged and report.iterations == 0
        assert np.allclose(u.values, 0.8, atol=1e-15)

    def test_linear_problem_converges_in_one_update(self):
        spec, grid = make_linear_advection_1d(velocity=1.0, diffusion=0.01,
                                              n=20, wave_speed=1.0)
        u0 = spec.initial_condition(grid.axis_centers(0), 0.0)
        _, _, report = newton_low_order(u0, spec, grid, dt=0.02)
        assert report.converged and report.iterations == 1

    def test_returned_state_is_flux_consistent_bitwise(self, rng):
        spec, grid = make_burgers_1d(16)
        u0 = rng.uniform(0.0, 2.0, 16)
        u, flux, report = newton_low_order(u0, spec, grid, dt=0.1)
        assert report.converged
        assert np.array_equal(u.values, u0 - 0.1 * flux.divergence())

    def test_large_step_respects_initial_range(self):
        spec = burgers_1d()
        grid = make_grid(spec, 100)
        x = grid.axis_centers(0)
        u0 = np.where(np.abs(x) < 0.5, 2.0, 0.0)
        dt = 10.0 * grid.spacing[0]
        u, _, report = newton_low_order(u0, spec, grid, dt=dt)
        assert report.converged
        assert np.min(u.values) >= -1e-13
        assert np.max(u.values) <= 2.0 + 1e-13

    def test_residual_certificate(self, rng):
        spec, grid = make_burgers_1d(16)
        u0 = rng.uniform(0.0, 2.0, 16)
        u, flux, report = newton_low_order(u0, spec, grid, dt=0.05)
        r = u.values - u0 + 0.05 * low_order_flux_set(
            u.values, spec, grid, t=0.05).divergence()
        # The recomputed state differs from the converged iterate by at
        # most the solve tolerance, so its own residual is of that order.
        assert np.linalg.norm(r) <= 10.0 * report.tolerance

    def test_exhausted_budget_raises_with_report(self, rng):
        spec, grid = make_burgers_1d(16)
        u0 = rng.uniform(0.0, 2.0, 16)
        with pytest.raises(NonConvergenceError) as exc:
            newton_low_order(u0, spec, grid, dt=0.1, max_iter=0)
        assert exc.value.report is not None
        assert not exc.value.report.converged

    def test_nonpositive_dt_rejected(self):
        spec, grid = make_burgers_1d(8)
        with pytest.raises(ValueError):
            newton_low_order(np.zeros(8), spec, grid, dt=0.0)

    def test_frozen_engine_reaches_same_solution(self, rng):
        spec, grid = make_burgers_1d(16)
        u0 = rng.uniform(0.0, 2.0, 16)
        fresh, _, rep_fresh = newton_low_order(
            u0, spec, grid, dt=0.05, engine=JacobianEngine(spec, grid))
        frozen, _, rep_frozen = newton_low_order(
            u0, spec, grid, dt=0.05,
            engine=JacobianEngine(spec, grid, "frozen-jacobian"))
        assert rep_frozen.converged
        assert rep_frozen.iterations >= rep_fresh.iterations
        assert np.max(np.abs(fresh.values - frozen.values)) <= 1e-10

    def test_dirichlet_problem_steps_cleanly(self, rng):
        spec, grid = make_burgers_1d(16, boundary=DIRICHLET)
        u0 = rng.uniform(0.0, 2.0, 16)
        u, _, report = newton_low_order(u0, spec, grid, dt=0.05)
        assert report.converged
        assert np.all(np.isfinite(u.values))

    def test_engine_mode_validated(self):
        spec, grid = make_burgers_1d(8)
        with pytest.raises(ValueError):
            JacobianEngine(spec, grid, "adaptive")


class TestNewtonStage:
    def test_zero_diagonal_is_explicit_copy(self):
        spec, grid = make_burgers_1d(8)
        explicit = np.linspace(0.0, 1.0, 8)
        y, report = newton_stage(explicit, explicit, 0.0, spec, grid,
                                 dt=0.1, stage_time=0.0)
        assert report.iterations == 0 and report.converged
        assert np.array_equal(y, explicit)
        y[0] = 99.0
        assert explicit[0] == 0.0  # result is not aliased to the input

    def test_stage_solve_converges_on_smooth_data(self):
        spec, grid = make_linear_advection_1d(velocity=1.0, diffusion=0.005,
                                              n=24, wave_speed=1.0)
        u0 = spec.initial_condition(grid.axis_centers(0), 0.0)
        y, report = newton_stage(u0, u0, 0.278, spec, grid, dt=0.01,
                                 stage_time=0.0)
        assert report.converged
        assert report.residual <= report.tolerance
