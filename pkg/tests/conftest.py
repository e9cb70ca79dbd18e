"""Shared fixtures: small custom problems with known closed forms."""

import numpy as np
import pytest

from mppfv.mesh import DIRICHLET, PERIODIC, StructuredGrid
from mppfv.problems import ProblemSpec


def constant_speed(value):
    def policy(axis, ua, ub, ra, rb, x, y, t):
        return np.full(np.broadcast_shapes(np.shape(ua), np.shape(ub)), float(value))

    return policy


def make_linear_advection_1d(velocity=1.0, diffusion=0.0, n=None,
                             lo=0.0, hi=1.0, boundary=PERIODIC,
                             dirichlet=(0.0, 0.0), wave_speed=None):
    """Constant-coefficient advection-diffusion on [lo, hi]."""
    eps = float(diffusion)
    v = float(velocity)

    spec = ProblemSpec(
        name="linear-test",
        dim=1,
        domain_lo=(lo,),
        domain_hi=(hi,),
        boundary=(boundary,),
        dirichlet_values=(dirichlet if boundary == DIRICHLET else None,),
        flux=lambda axis, u, x, y, t: v * np.asarray(u, dtype=float),
        flux_derivative=lambda axis, u, x, y, t: v * np.ones(np.shape(u)),
        diffusion=lambda u, x, y: np.full(
            np.broadcast_shapes(np.shape(u), np.shape(x)), eps),
        diffusion_derivative=lambda u, x, y: np.zeros(
            np.broadcast_shapes(np.shape(u), np.shape(x))),
        wave_speed_bound=constant_speed(abs(v) if wave_speed is None else wave_speed),
        initial_condition=lambda x, y: 0.5 + 0.4 * np.sin(
            2.0 * np.pi * (np.asarray(x) - lo) / (hi - lo)),
        global_min=0.0,
        global_max=1.0,
        final_time=1.0,
        exact_solution=None,
    )
    if n is None:
        return spec
    grid = StructuredGrid(1, (n,), (lo,), (hi,), (boundary,))
    return spec, grid


def make_pure_diffusion_1d(coefficient=1.0, n=None, boundary=PERIODIC):
    """Constant-coefficient heat equation with (numerically) zero advection."""
    c = float(coefficient)
    spec = ProblemSpec(
        name="diffusion-test",
        dim=1,
        domain_lo=(0.0,),
        domain_hi=(1.0,),
        boundary=(boundary,),
        dirichlet_values=((0.0, 0.0) if boundary == DIRICHLET else None,),
        flux=lambda axis, u, x, y, t: np.zeros(
            np.broadcast_shapes(np.shape(u), np.shape(x))),
        flux_derivative=lambda axis, u, x, y, t: np.zeros(
            np.broadcast_shapes(np.shape(u), np.shape(x))),
        diffusion=lambda u, x, y: np.full(
            np.broadcast_shapes(np.shape(u), np.shape(x)), c),
        diffusion_derivative=lambda u, x, y: np.zeros(
            np.broadcast_shapes(np.shape(u), np.shape(x))),
        wave_speed_bound=constant_speed(1e-12),
        initial_condition=lambda x, y: 0.5 + 0.4 * np.sin(2.0 * np.pi * np.asarray(x)),
        global_min=0.0,
        global_max=1.0,
        final_time=1.0,
        exact_solution=None,
    )
    if n is None:
        return spec
    grid = StructuredGrid(1, (n,), (0.0,), (1.0,), (boundary,))
    return spec, grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
