"""Newton-type solvers for the implicit low- and high-order systems.

The backward-Euler low-order system and each DIRK stage are solved with a
Newton-like iteration whose iteration matrix is a *pseudo-Jacobian*: the
exact derivative of the low-order residual with the dependence of the
wave-speed bound on the solution ignored.  The same matrix serves the
high-order stage systems (differentiating a WENO residual exactly is not
worth the cost), which turns Newton into a robust quasi-Newton iteration;
the residual always uses the true (low- or high-order) fluxes, so converged
answers are exact solutions of the intended systems regardless of the
iteration matrix.

Per face with low-side state ``u_L``, high-side state ``u_R``, spacing
``d``, wave-speed bound ``lam``, face diffusion ``c`` and its state
derivative ``c'`` (evaluated at the mean state), the flux derivatives are

    dG/du_L = f'(u_L)/2 + lam/2 + c/d - (c'/2) (u_R - u_L)/d
    dG/du_R = f'(u_R)/2 - lam/2 - c/d - (c'/2) (u_R - u_L)/d

and the pseudo-Jacobian is ``J = I + (scale/|K_i|) sum_faces |S| dG/du_j``
with ``scale`` the total implicit weight (the time step for backward
Euler, ``a_mm * dt`` for stage ``m``).

Linear solves: direct sparse LU in 1D; in 2D a GMRES iteration
preconditioned by the factorization of the constant-coefficient frozen
Jacobian (relative tolerance 1e-13).  In ``frozen-jacobian`` mode the
frozen factorization itself is the iteration matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fluxes
from .mesh import PERIODIC, CellField, ghost_fill
from .problems import initial_cell_averages

SOLVER_MODES = ("fresh-jacobian", "frozen-jacobian")

TOL_LOW_ORDER = 1e-12
TOL_STAGE = 1e-8
MAX_ITER_LOW_ORDER = 100
# The stage iteration matrix is the low-order pseudo-Jacobian, so convergence
# is linear with a rate that degrades as the step size grows; large-step runs
# (dt ~ 5 dx on a shock) need ~60 iterations per stage.
MAX_ITER_STAGE = 200


class NonConvergenceError(RuntimeError):
    """A nonlinear solve exhausted its iteration budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one nonlinear or linear solve."""

    iterations: int
    residual: float
    converged: bool
    tolerance: float

    def __post_init__(self):
        if self.converged and not self.residual <= self.tolerance:
            raise ValueError("converged report must satisfy its tolerance")


@dataclass
class SparseBandedMatrix:
    """Banded sparse matrix (tridiagonal with periodic corners in 1D,
    5-point pattern with periodic wrap in 2D) with a cached factorization.

    The stored pattern is structurally symmetric by construction: every
    face contributes both off-diagonal positions (values may be zero).
    """

    dimension: int
    matrix: object
    _lu: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape != (self.dimension, self.dimension):
            raise ValueError("matrix shape must equal (dimension, dimension)")
        self.matrix = m

    def row_entries(self, i):
        """Nonzero column indices and values of row ``i``."""
        m = self.matrix
        lo, hi = m.indptr[i], m.indptr[i + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def is_structurally_symmetric(self):
        pattern = self.matrix.copy()
        pattern.data = np.ones_like(pattern.data)
        return (pattern != pattern.T).nnz == 0

    def matvec(self, v):
        return self.matrix @ np.ravel(v)

    def factorize(self):
        """Compute (once) and return the sparse LU factorization."""
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as err:  # splu signals exact singularity
                raise np.linalg.LinAlgError(str(err)) from err
        return self._lu

    def solve(self, rhs, preconditioner=None, rtol=1e-13):
        """Solve ``A x = rhs``: directly via LU, or by preconditioned GMRES
        when another factorized matrix is supplied as preconditioner."""
        b = np.ravel(np.asarray(rhs, dtype=float))
        if preconditioner is None:
            return self.factorize().solve(b)
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros_like(b)
        lu = preconditioner.factorize()
        M = spla.LinearOperator(self.matrix.shape, matvec=lu.solve)
        kwargs = dict(M=M, restart=60, maxiter=300, atol=0.0)
        try:
            x, info = spla.gmres(self.matrix, b, rtol=rtol, **kwargs)
        except TypeError:  # older scipy spells the relative tolerance 'tol'
            x, info = spla.gmres(self.matrix, b, tol=rtol, **kwargs)
        if info != 0 or np.linalg.norm(self.matrix @ x - b) > 10 * rtol * nb:
            return self.factorize().solve(b)
        return x


def linear_solve(matrix, rhs):
    """Solve a banded linear system to relative residual 1e-13.

    Accepts a :class:`SparseBandedMatrix`, a scipy sparse matrix, or a dense
    array.  Raises ``numpy.linalg.LinAlgError`` on singular input.
    """
    if isinstance(matrix, SparseBandedMatrix):
        return matrix.solve(rhs)
    if sp.issparse(matrix):
        return SparseBandedMatrix(matrix.shape[0], matrix).solve(rhs)
    return np.linalg.solve(np.asarray(matrix, dtype=float),
                           np.ravel(np.asarray(rhs, dtype=float)))


# ---------------------------------------------------------------------------
# Pseudo-Jacobian assembly
# ---------------------------------------------------------------------------

def _face_adjacent_ids(grid, axis):
    """Flattened cell ids on the low/high side of each face of ``axis``,
    with -1 marking a ghost side, and the mask of faces to assemble (on
    periodic axes the wrap face is counted once, at the near array end)."""
    periodic = grid.boundary[axis] == PERIODIC
    if grid.dim == 1:
        n = grid.nx
        k = np.arange(n + 1)
        if periodic:
            low = (k - 1) % n
            high = k % n
            use = k < n
        else:
            low = np.where(k >= 1, k - 1, -1)
            high = np.where(k <= n - 1, k, -1)
            use = np.ones(n + 1, dtype=bool)
        return low, high, use

    ny, nx = grid.ny, grid.nx
    if axis == 0:
        iy = np.arange(ny)[:, None]
        k = np.arange(nx + 1)[None, :]
        if periodic:
            low = iy * nx + (k - 1) % nx
            high = iy * nx + k % nx
            use = np.broadcast_to(k < nx, (ny, nx + 1))
        else:
            low = np.where(k >= 1, iy * nx + (k - 1), -1)
            high = np.where(k <= nx - 1, iy * nx + k, -1)
            use = np.ones((ny, nx + 1), dtype=bool)
    else:
        k = np.arange(ny + 1)[:, None]
        ix = np.arange(nx)[None, :]
        if periodic:
            low = ((k - 1) % ny) * nx + ix
            high = (k % ny) * nx + ix
            use = np.broadcast_to(k < ny, (ny + 1, nx))
        else:
            low = np.where(k >= 1, (k - 1) * nx + ix, -1)
            high = np.where(k <= ny - 1, k * nx + ix, -1)
            use = np.ones((ny + 1, nx), dtype=bool)
    return (np.broadcast_to(low, use.shape).ravel(),
            np.broadcast_to(high, use.shape).ravel(),
            use.ravel())


def _axis_flux_derivatives(u_ext, spec, grid, axis, t):
    """Per-face ``(dG/du_L, dG/du_R)`` of the low-order flux."""
    lo, hi = fluxes.adjacent_slices(grid, 1, axis)
    ua, ub = u_ext[lo], u_ext[hi]
    xf, yf = fluxes.face_coordinates(grid, axis)
    lam = fluxes._wave_speeds(spec, axis, ua, ub, ua, ub, xf, yf, t)
    if spec.flux_at_cell_centers:
        (xa, ya), (xb, yb) = fluxes.adjacent_center_coordinates(grid, axis)
    else:
        (xa, ya), (xb, yb) = (xf, yf), (xf, yf)
    fpa = np.asarray(spec.flux_derivative(axis, ua, xa, ya, t), dtype=float)
    fpb = np.asarray(spec.flux_derivative(axis, ub, xb, yb, t), dtype=float)
    d = grid.spacing[axis]
    u_mid = 0.5 * (ua + ub)
    c = np.asarray(spec.diffusion(u_mid, xf, yf), dtype=float)
    cp = np.asarray(spec.diffusion_derivative(u_mid, xf, yf), dtype=float)
    slope = (ub - ua) / d
    shape = ua.shape
    dGdL = np.broadcast_to(0.5 * fpa + 0.5 * lam + c / d - 0.5 * cp * slope,
                           shape)
    dGdR = np.broadcast_to(0.5 * fpb - 0.5 * lam - c / d - 0.5 * cp * slope,
                           shape)
    return dGdL, dGdR


def assemble_pseudo_jacobian(field_in, spec, grid, scale, t=0.0):
    """Pseudo-Jacobian ``J = I + (scale/|K_i|) sum_faces |S| dG^L/du_j`` at
    the given state, with the wave-speed bound held fixed.

    ``scale`` is the total implicit weight: the time step itself for the
    backward-Euler system, ``a_mm * dt`` for DIRK stage ``m``.  Ghost cells
    of Dirichlet boundaries are data, not unknowns: they contribute no
    columns.
    """
    u_ext = ghost_fill(_as_field(field_in, grid), spec, time=t, width=1)
    rows, cols, vals = [], [], []
    for axis in range(grid.dim):
        dGdL, dGdR = _axis_flux_derivatives(u_ext, spec, grid, axis, t)
        low, high, use = _face_adjacent_ids(grid, axis)
        dL = dGdL.ravel()[use]
        dR = dGdR.ravel()[use]
        L, R = low[use], high[use]
        coef = scale / grid.spacing[axis]
        mL, mR = L >= 0, R >= 0
        both = mL & mR
        # Row of the low-side cell: the face is outward-oriented (+axis).
        rows.append(L[mL]);   cols.append(L[mL]);   vals.append(coef * dL[mL])
        rows.append(L[both]); cols.append(R[both]); vals.append(coef * dR[both])
        # Row of the high-side cell: the same face is inward (-axis).
        rows.append(R[mR]);   cols.append(R[mR]);   vals.append(-coef * dR[mR])
        rows.append(R[both]); cols.append(L[both]); vals.append(-coef * dL[both])
    N = grid.num_cells
    # The identity goes into the same COO batch: sparse *addition* would
    # prune the explicit zeros of one-sided (pure upwind) couplings and
    # destroy the structurally symmetric face pattern.
    rows.append(np.arange(N))
    cols.append(np.arange(N))
    vals.append(np.ones(N))
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    A.sum_duplicates()
    return SparseBandedMatrix(N, A)


def frozen_jacobian(spec, grid, dt, scale=1.0):
    """Constant-coefficient pseudo-Jacobian, factorized once.

    Linearizes about the constant state ``ubar = (max u0 - min u0)/2`` of
    the initial data; at a constant state the slope-dependent diffusion
    terms vanish, so the matrix is exactly the discrete linear
    convection-diffusion operator and can be reused across all steps.
    """
    u0 = initial_cell_averages(spec, grid).values
    ubar = 0.5 * (float(np.max(u0)) - float(np.min(u0)))
    frozen_state = np.full(grid.shape, ubar)
    jac = assemble_pseudo_jacobian(frozen_state, spec, grid, scale * dt, t=0.0)
    jac.factorize()
    return jac


def _as_field(field_in, grid):
    if isinstance(field_in, CellField):
        return field_in
    return CellField(grid, np.asarray(field_in, dtype=float))


# ---------------------------------------------------------------------------
# Linear-solve strategy shared by the Newton loops
# ---------------------------------------------------------------------------

class JacobianEngine:
    """Owns the iteration-matrix strategy and the frozen factorizations.

    ``fresh-jacobian``: reassemble the pseudo-Jacobian at every iterate
    (direct solve in 1D; in 2D GMRES preconditioned with the frozen
    factorization).  ``frozen-jacobian``: always iterate with the frozen
    constant-coefficient factorization.
    """

    def __init__(self, spec, grid, mode="fresh-jacobian"):
        if mode not in SOLVER_MODES:
            raise ValueError(f"unknown solver mode {mode!r}; "
                             f"expected one of {SOLVER_MODES}")
        self.spec = spec
        self.grid = grid
        self.mode = mode
        self._frozen = {}

    def frozen(self, step_dt):
        key = float(step_dt)
        if key not in self._frozen:
            self._frozen[key] = frozen_jacobian(self.spec, self.grid, key)
        return self._frozen[key]

    def newton_update(self, state, step_dt, stage_time, residual):
        """Solve ``J delta = -residual`` for the current iterate."""
        rhs = -np.ravel(residual)
        if self.mode == "frozen-jacobian":
            delta = self.frozen(step_dt).solve(rhs)
        else:
            jac = assemble_pseudo_jacobian(state, self.spec, self.grid,
                                           step_dt, t=stage_time)
            if self.grid.dim == 1:
                delta = jac.solve(rhs)
            else:
                delta = jac.solve(rhs, preconditioner=self.frozen(step_dt))
        return delta.reshape(self.grid.shape)


def _l2(v):
    return float(np.linalg.norm(np.ravel(v)))


# ---------------------------------------------------------------------------
# Newton loops
# ---------------------------------------------------------------------------

def newton_low_order(u_n, spec, grid, dt, t=0.0, engine=None,
                     tol=TOL_LOW_ORDER, max_iter=MAX_ITER_LOW_ORDER):
    """Solve the low-order backward-Euler system
    ``u - u^n + (dt/|K_i|) sum |S| G^L(u) = 0`` to l2 residual <= tol.

    Returns ``(u^L CellField, G^L FaceFluxSet, SolverReport)``; raises
    :class:`NonConvergenceError` when the iteration budget is exhausted.
    ``report.iterations`` counts Newton updates (a converged verification
    pass follows the last update).  The returned state is recomputed from
    the returned fluxes, ``u^L = u^n - (dt/|K|) sum |S| G^L``, so the pair
    is exactly conservative; the reported residual is that of the final
    Newton iterate, from which the returned state differs by at most the
    tolerance.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if engine is None:
        engine = JacobianEngine(spec, grid)
    u0 = u_n.values if isinstance(u_n, CellField) else np.asarray(u_n, dtype=float)
    u = u0.copy()
    stage_time = t + dt
    for k in range(max_iter + 1):
        flux = fluxes.low_order_flux_set(u, spec, grid, t=stage_time)
        r = u - u0 + dt * flux.divergence()
        res = _l2(r)
        if res <= tol:
            return (CellField(grid, u0 - dt * flux.divergence()), flux,
                    SolverReport(k, res, True, tol))
        if k == max_iter:
            report = SolverReport(max_iter, res, False, tol)
            raise NonConvergenceError(
                f"low-order solve stalled at residual {res:.3e} "
                f"after {max_iter} iterations", report)
        u = u + engine.newton_update(u, dt, stage_time, r)
    raise AssertionError("unreachable")


def _newton_high_order(reference, step_dt, spec, grid, stage_time, guess,
                       engine, tol=TOL_STAGE, max_iter=MAX_ITER_STAGE):
    """Core quasi-Newton loop for one implicit stage of the high-order
    scheme: solve ``y - reference + (step_dt/|K_i|) sum |S| G^H(y) = 0``.

    Returns ``(y, G^H(y) FaceFluxSet, SolverReport)`` with the best iterate
    on non-convergence (converged=False, never an exception).
    """
    y = np.asarray(guess, dtype=float).copy()
    best = None
    for k in range(max_iter + 1):
        flux = fluxes.high_order_flux(y, spec, grid, t=stage_time)
        r = y - reference + step_dt * flux.divergence()
        res = _l2(r)
        if res <= tol:
            return y, flux, SolverReport(k, res, True, tol)
        if best is None or res < best[0]:
            best = (res, y, flux, k)
        if k == max_iter:
            break
        y = y + engine.newton_update(y, step_dt, stage_time, r)
    res, y, flux, _ = best
    return y, flux, SolverReport(max_iter, res, False, tol)


def newton_stage(u_n, explicit_part, a_mm, spec, grid, dt, stage_time,
                 guess=None, engine=None, tol=TOL_STAGE,
                 max_iter=MAX_ITER_STAGE):
    """Solve DIRK stage ``y = explicit_part - (a_mm*dt/|K_i|) sum |S| G^H(y)``
    with the low-order pseudo-Jacobian as iteration matrix.

    ``explicit_part`` is ``u^n`` minus the tableau-weighted divergences of
    the previous stage fluxes.  ``a_mm = 0`` degenerates to an explicit
    evaluation with zero iterations.  Non-convergence is reported through
    the returned :class:`SolverReport` together with the best iterate.
    """
    r_const = np.asarray(explicit_part, dtype=float)
    if a_mm == 0.0:
        return r_const.copy(), SolverReport(0, 0.0, True, tol)
    if engine is None:
        engine = JacobianEngine(spec, grid)
    if guess is None:
        guess = u_n.values if isinstance(u_n, CellField) else u_n
    y, _, report = _newton_high_order(r_const, a_mm * dt, spec, grid,
                                      stage_time, guess, engine,
                                      tol=tol, max_iter=max_iter)
    return y, report


def make_stage_solver(spec, grid, mode="fresh-jacobian", tol=TOL_STAGE,
                      max_iter=MAX_ITER_STAGE):
    """Stage-solver callable for :func:`time_integration.dirk_step`, sharing
    one frozen factorization cache across all stages and steps."""
    engine = JacobianEngine(spec, grid, mode)

    def solver(reference, step_dt, stage_time, guess):
        y, _, report = _newton_high_order(reference, step_dt, spec, grid,
                                          stage_time, guess, engine,
                                          tol=tol, max_iter=max_iter)
        return y, report

    return solver


def make_high_order_substep_solver(spec, grid, mode="fresh-jacobian",
                                   tol=TOL_STAGE, max_iter=MAX_ITER_STAGE):
    """Backward-Euler substep solver (unlimited high-order flux) for
    :func:`time_integration.iex_step`.

    The returned state is recomputed from the realized flux,
    ``out = in - (sub_dt/|K|) sum |S| G^H(y)``, so chaining substeps
    conserves mass exactly.
    """
    engine = JacobianEngine(spec, grid, mode)

    def substep(u_prev, sub_dt, sub_time):
        u_prev = np.asarray(u_prev, dtype=float)
        y, flux, report = _newton_high_order(u_prev, sub_dt, spec, grid,
                                             sub_time, u_prev, engine,
                                             tol=tol, max_iter=max_iter)
        if not report.converged:
            raise NonConvergenceError(
                f"substep solve stalled at residual {report.residual:.3e}",
                report)
        return u_prev - sub_dt * flux.divergence(), flux

    return substep
