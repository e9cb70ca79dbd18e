"""Numerical face fluxes and bar states.

For the conservation law ``u_t + div f = div(c grad u)`` on a structured
grid, this module assembles, per geometric face,

* the low-order convective flux (local Lax-Friedrichs / Rusanov form)
  ``F^L = n.(f_i + f_j)/2 - lam^A (u_j - u_i)/2``,
* the low-order diffusive flux ``P^L = c_ij (u_j - u_i)/|x_j - x_i|`` with
  ``c_ij = c((u_i+u_j)/2)`` at the face,
* the combined low-order flux ``G^L = F^L - P^L``,
* the *bar states*: the convective intermediate state
  ``ubar^A = (u_i+u_j)/2 - n.(f_j - f_i)/(2 lam^A)``, the diffusive average
  ``ubar^D = (u_i+u_j)/2``, their blend ``ubar`` weighted by
  ``2 c_ij/(lam^A |dx|)``, and the combined face speed
  ``lam = lam^A (1 + 2 c_ij/(lam^A |dx|))``.  These satisfy
  ``sum_j |S_ij| lam_ij (ubar_ij - u_i) = -sum_j |S_ij| G^L_ij`` cellwise,
  the identity behind the local-extremum-diminishing structure of the
  low-order scheme,
* the high-order flux ``G^H = F^H - P^H`` built from fifth-order WENO face
  values (Rusanov form on the two reconstructed point values) and the
  linear fourth-order face derivative with the diffusion coefficient
  averaged over the two reconstructed states.

Storage convention: one array per axis holding the flux *along the positive
axis direction* at every face plane, shape ``(nx+1,)`` in 1D and
``(ny, nx+1)`` / ``(ny+1, nx)`` for x-/y-faces in 2D.  On periodic axes the
wrap face appears at both array ends; the far entry is copied bitwise from
the near one so every geometric face has exactly one computed value and
antisymmetry ``G_ij = -G_ji`` is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import weno
from .mesh import GHOST_WIDTH, PERIODIC, CellField, ghost_fill
from .problems import LAMBDA_FLOOR


def _values(field):
    return field.values if isinstance(field, CellField) else np.asarray(field, dtype=float)


# ---------------------------------------------------------------------------
# Face-array geometry helpers
# ---------------------------------------------------------------------------

def face_array_shapes(grid):
    """Per-axis shapes of the face arrays."""
    if grid.dim == 1:
        return ((grid.nx + 1,),)
    return ((grid.ny, grid.nx + 1), (grid.ny + 1, grid.nx))


def face_coordinates(grid, axis):
    """Face-midpoint coordinates ``(X, Y)`` broadcastable to the face-array
    shape of ``axis`` (``Y`` is 0.0 in 1D)."""
    if grid.dim == 1:
        return grid.axis_faces(0), 0.0
    if axis == 0:
        return grid.axis_faces(0)[None, :], grid.axis_centers(1)[:, None]
    return grid.axis_centers(0)[None, :], grid.axis_faces(1)[:, None]


def adjacent_center_coordinates(grid, axis):
    """Cell-center coordinates of the two cells adjacent to each face of
    ``axis``, as ``((xa, ya), (xb, yb))`` broadcastable to the face-array
    shape.  Periodic ghost cells get wrapped in-domain coordinates."""
    n = grid.cells_per_axis[axis]
    ext = grid.extended_axis_centers(axis, 1)
    a, b = ext[: n + 1], ext[1:]
    if grid.dim == 1:
        return (a, 0.0), (b, 0.0)
    if axis == 0:
        yc = grid.axis_centers(1)[:, None]
        return (a[None, :], yc), (b[None, :], yc)
    xc = grid.axis_centers(0)[None, :]
    return (xc, a[:, None]), (xc, b[:, None])


def adjacent_slices(grid, width, axis):
    """Index tuples selecting, from a ghost-extended array, the low-side and
    high-side cell values of every face of ``axis`` (face-array shape)."""
    if grid.dim == 1:
        n = grid.nx
        return (slice(width - 1, width + n),), (slice(width, width + n + 1),)
    ny, nx = grid.ny, grid.nx
    if axis == 0:
        lo = (slice(width, width + ny), slice(width - 1, width + nx))
        hi = (slice(width, width + ny), slice(width, width + nx + 1))
    else:
        lo = (slice(width - 1, width + ny), slice(width, width + nx))
        hi = (slice(width, width + ny + 1), slice(width, width + nx))
    return lo, hi


def tie_periodic_seam(arr, grid, axis):
    """Copy the near wrap-face entry over the far one (in place) so both
    array ends of a periodic axis hold bitwise-identical values."""
    if grid.boundary[axis] != PERIODIC:
        return arr
    if grid.dim == 1:
        arr[-1] = arr[0]
    elif axis == 0:
        arr[:, -1] = arr[:, 0]
    else:
        arr[-1, :] = arr[0, :]
    return arr


def _face_entry(grid, face):
    """Index into the per-axis face array for a :class:`mesh.FaceRecord`."""
    if grid.dim == 1:
        i = face.owner[0]
        return (i + 1,) if face.normal > 0 else (0,)
    ix, iy = face.owner
    if face.axis == 0:
        return (iy, ix + 1) if face.normal > 0 else (iy, 0)
    return (iy + 1, ix) if face.normal > 0 else (0, ix)


# ---------------------------------------------------------------------------
# Face data containers
# ---------------------------------------------------------------------------

@dataclass
class FaceFluxSet:
    """One flux value per geometric face, stored along +axis per axis.

    Supports elementwise arithmetic (for flux differences and tableau-
    weighted aggregation) and cellwise divergence.
    """

    grid: object
    arrays: tuple

    def __post_init__(self):
        expected = face_array_shapes(self.grid)
        if len(self.arrays) != self.grid.dim:
            raise ValueError("one face array per axis required")
        arrays = []
        for arr, shape in zip(self.arrays, expected):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"face array shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("face fluxes must be finite")
            arrays.append(arr)
        self.arrays = tuple(arrays)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, tuple(np.zeros(s) for s in face_array_shapes(grid)))

    def copy(self):
        return FaceFluxSet(self.grid, tuple(a.copy() for a in self.arrays))

    def value(self, face):
        """Flux through ``face`` oriented outward from its owner cell."""
        v = self.arrays[face.axis][_face_entry(self.grid, face)]
        return v if face.normal > 0 else -v

    def divergence(self):
        """Per-cell ``(1/|K_i|) sum_j |S_ij| G_ij`` (outward)."""
        g = self.grid
        if g.dim == 1:
            G = self.arrays[0]
            return (G[1:] - G[:-1]) / g.spacing[0]
        Gx, Gy = self.arrays
        return ((Gx[:, 1:] - Gx[:, :-1]) / g.spacing[0]
                + (Gy[1:, :] - Gy[:-1, :]) / g.spacing[1])

    def __add__(self, other):
        return FaceFluxSet(self.grid,
                           tuple(a + b for a, b in zip(self.arrays, other.arrays)))

    def __sub__(self, other):
        return FaceFluxSet(self.grid,
                           tuple(a - b for a, b in zip(self.arrays, other.arrays)))

    def __mul__(self, scalar):
        return FaceFluxSet(self.grid, tuple(a * float(scalar) for a in self.arrays))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass
class BarStateSet:
    """Per-face bar states and speeds (orientation-symmetric), plus the
    adjacent cell values they were built from."""

    grid: object
    ubar_a: tuple   # convective bar state
    ubar_d: tuple   # diffusive bar state (arithmetic mean)
    ubar: tuple     # blended bar state
    lam: tuple      # combined face speed lam_ij
    lam_a: tuple    # convective wave-speed bound lam^A_ij
    c_mid: tuple    # face diffusion coefficient c_ij
    u_low: tuple    # low-side adjacent cell value
    u_high: tuple   # high-side adjacent cell value

    def face_value(self, face, name):
        """One named quantity (e.g. ``"ubar"``, ``"lam"``) at a face."""
        return getattr(self, name)[face.axis][_face_entry(self.grid, face)]

    def _cell_sum(self, per_axis):
        """Sum ``|S_ij| q_ij`` over the faces of each cell."""
        g = self.grid
        if g.dim == 1:
            q = per_axis[0]
            return q[:-1] + q[1:]
        qx, qy = per_axis
        sx, sy = g.face_area(0), g.face_area(1)
        return (sx * (qx[:, :-1] + qx[:, 1:]) + sy * (qy[:-1, :] + qy[1:, :]))

    def cell_coefficient(self):
        """``a_i = sum_j |S_ij| lam_ij`` per cell."""
        return self._cell_sum(self.lam)

    def cell_bar_average(self):
        """``ubar_i = (1/a_i) sum_j |S_ij| lam_ij ubar_ij`` per cell."""
        weighted = tuple(l * u for l, u in zip(self.lam, self.ubar))
        return self._cell_sum(weighted) / self.cell_coefficient()


# ---------------------------------------------------------------------------
# Wave-speed evaluation
# ---------------------------------------------------------------------------

def _wave_speeds(spec, axis, ua, ub, ra, rb, xf, yf, t):
    lam = np.array(spec.wave_speed_bound(axis, ua, ub, ra, rb, xf, yf, t),
                   dtype=float)
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
        raise ValueError("wave-speed bound must be positive and finite")
    return np.maximum(lam, LAMBDA_FLOOR)


# ---------------------------------------------------------------------------
# Low-order assembly
# ---------------------------------------------------------------------------

class _AxisLowOrder:
    __slots__ = ("G", "ubar_a", "ubar_d", "ubar", "lam", "lam_a", "c_mid",
                 "ua", "ub")


def _axis_low_order(u_ext, spec, grid, axis, t, width):
    lo, hi = adjacent_slices(grid, width, axis)
    ua, ub = u_ext[lo], u_ext[hi]
    xf, yf = face_coordinates(grid, axis)
    lam_a = _wave_speeds(spec, axis, ua, ub, ua, ub, xf, yf, t)

    if spec.flux_at_cell_centers:
        (xa, ya), (xb, yb) = adjacent_center_coordinates(grid, axis)
    else:
        (xa, ya), (xb, yb) = (xf, yf), (xf, yf)
    fa = np.asarray(spec.flux(axis, ua, xa, ya, t), dtype=float)
    fb = np.asarray(spec.flux(axis, ub, xb, yb, t), dtype=float)

    d = grid.spacing[axis]
    c_mid = np.array(spec.diffusion(0.5 * (ua + ub), xf, yf), dtype=float)

    out = _AxisLowOrder()
    out.ua, out.ub = ua, ub
    out.G = 0.5 * (fa + fb) - 0.5 * lam_a * (ub - ua) - c_mid * (ub - ua) / d
    out.ubar_d = 0.5 * (ua + ub)
    out.ubar_a = out.ubar_d - (fb - fa) / (2.0 * lam_a)
    ratio = 2.0 * c_mid / (lam_a * d)
    out.lam = lam_a * (1.0 + ratio)
    out.lam_a = lam_a
    out.c_mid = c_mid
    out.ubar = (out.ubar_a + ratio * out.ubar_d) / (1.0 + ratio)
    for name in ("G", "ubar_a", "ubar_d", "ubar", "lam", "lam_a", "c_mid"):
        tie_periodic_seam(getattr(out, name), grid, axis)
    return out


def low_order_with_bars(field, spec, grid, t=0.0):
    """Low-order fluxes and bar states in one pass.

    Returns ``(FaceFluxSet of G^L, BarStateSet)``.
    """
    u_ext = ghost_fill(_values_field(field, grid), spec, time=t, width=1)
    per_axis = [_axis_low_order(u_ext, spec, grid, axis, t, width=1)
                for axis in range(grid.dim)]
    flux = FaceFluxSet(grid, tuple(p.G for p in per_axis))
    bars = BarStateSet(
        grid,
        ubar_a=tuple(p.ubar_a for p in per_axis),
        ubar_d=tuple(p.ubar_d for p in per_axis),
        ubar=tuple(p.ubar for p in per_axis),
        lam=tuple(p.lam for p in per_axis),
        lam_a=tuple(p.lam_a for p in per_axis),
        c_mid=tuple(p.c_mid for p in per_axis),
        u_low=tuple(p.ua for p in per_axis),
        u_high=tuple(p.ub for p in per_axis),
    )
    return flux, bars


def _values_field(field, grid):
    if isinstance(field, CellField):
        return field
    return CellField(grid, np.asarray(field, dtype=float))


def low_order_flux_set(field, spec, grid, t=0.0):
    """``G^L = F^L - P^L`` per face as a :class:`FaceFluxSet`."""
    return low_order_with_bars(field, spec, grid, t)[0]


def bar_states(field, spec, grid, t=0.0):
    """Bar states, blended states and face speeds per face."""
    return low_order_with_bars(field, spec, grid, t)[1]


def low_order_rhs(field, spec, grid, t=0.0):
    """Per-cell ``sum_j |S_ij| lam_ij (ubar_ij - u_i) / |K_i|`` — the
    bar-state form of the low-order right-hand side, algebraically equal to
    ``-(1/|K_i|) sum_j |S_ij| G^L_ij``."""
    u = _values(field)
    bars = bar_states(field, spec, grid, t)
    a = bars.cell_coefficient()
    return (a * (bars.cell_bar_average() - u)) / grid.cell_volume


# ---------------------------------------------------------------------------
# Face-level operations (one face at a time)
# ---------------------------------------------------------------------------

def _face_xy(face):
    x = face.midpoint[0]
    y = face.midpoint[1] if len(face.midpoint) > 1 else 0.0
    return x, y


def low_order_convective_flux(u_i, u_j, face, spec, t=0.0):
    """Rusanov flux ``n.(f(u_j)+f(u_i))/2 - lam^A (u_j - u_i)/2`` through one
    face, oriented outward from the owner cell (``u_i`` owner, ``u_j``
    neighbor)."""
    x, y = _face_xy(face)
    lam = float(np.asarray(
        spec.wave_speed_bound(face.axis, u_i, u_j, u_i, u_j, x, y, t)))
    if not np.isfinite(lam) or lam <= 0.0:
        raise ValueError("wave-speed bound must be positive and finite")
    lam = max(lam, LAMBDA_FLOOR)
    if spec.flux_at_cell_centers:
        shift = 0.5 * face.normal * face.spacing
        ci = [x, y]
        cj = [x, y]
        ci[face.axis] -= shift
        cj[face.axis] += shift
        f_i = float(np.asarray(spec.flux(face.axis, u_i, ci[0], ci[1], t)))
        f_j = float(np.asarray(spec.flux(face.axis, u_j, cj[0], cj[1], t)))
    else:
        f_i = float(np.asarray(spec.flux(face.axis, u_i, x, y, t)))
        f_j = float(np.asarray(spec.flux(face.axis, u_j, x, y, t)))
    return face.normal * 0.5 * (f_j + f_i) - 0.5 * lam * (u_j - u_i)


def low_order_diffusive_flux(u_i, u_j, face, spec):
    """``c_ij (u_j - u_i)/|x_j - x_i|`` with ``c_ij`` evaluated at the mean
    state and the face midpoint, oriented outward from the owner cell."""
    x, y = _face_xy(face)
    c = float(np.asarray(spec.diffusion(0.5 * (u_i + u_j), x, y)))
    return c * (u_j - u_i) / face.spacing


# ---------------------------------------------------------------------------
# High-order assembly
# ---------------------------------------------------------------------------

def _axis_high_order(u_ext, spec, grid, axis, t):
    w = GHOST_WIDTH
    if grid.dim == 1:
        line = u_ext
        um, up = weno.face_values_line(line, ghost=w)
        dP = weno.face_derivatives_line(line, grid.spacing[0], ghost=w)
    elif axis == 0:
        sub = u_ext[w: w + grid.ny, :]
        um, up = weno.face_values_line(sub, ghost=w)
        dP = weno.face_derivatives_line(sub, grid.spacing[0], ghost=w)
    else:
        sub = u_ext[:, w: w + grid.nx].T
        um_t, up_t = weno.face_values_line(sub, ghost=w)
        um, up = um_t.T, up_t.T
        dP = weno.face_derivatives_line(sub, grid.spacing[1], ghost=w).T

    lo, hi = adjacent_slices(grid, w, axis)
    ua, ub = u_ext[lo], u_ext[hi]
    xf, yf = face_coordinates(grid, axis)
    lam = _wave_speeds(spec, axis, ua, ub, um, up, xf, yf, t)

    fm = np.asarray(spec.flux(axis, um, xf, yf, t), dtype=float)
    fp = np.asarray(spec.flux(axis, up, xf, yf, t), dtype=float)
    FH = 0.5 * (fm + fp) - 0.5 * lam * (up - um)
    cH = 0.5 * (np.asarray(spec.diffusion(um, xf, yf), dtype=float)
                + np.asarray(spec.diffusion(up, xf, yf), dtype=float))
    GH = FH - cH * dP
    return tie_periodic_seam(GH, grid, axis)


def high_order_flux(field, spec, grid, t=0.0):
    """``F^H - P^H`` per face: Rusanov form on the two WENO face values minus
    the reconstructed diffusive flux (fourth-order face derivative times the
    average of the diffusion coefficient at the two reconstructed states)."""
    u_ext = ghost_fill(_values_field(field, grid), spec, time=t, width=GHOST_WIDTH)
    arrays = tuple(_axis_high_order(u_ext, spec, grid, axis, t)
                   for axis in range(grid.dim))
    return FaceFluxSet(grid, arrays)
