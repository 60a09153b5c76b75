"""Shared fixtures: ground states, kernels and lifted base states.

Session-scoped so the expensive solves run once.  Two scales are used:
the acceptance scale (256^2 box, default radial grid) and a small scale
for unit tests that exercise the same code paths faster.
"""

import numpy as np
import pytest

from logchoquard.grids import Grid2D
from logchoquard.groundstate import SolveOptions, ground_state_field, solve_ground_state
from logchoquard.logkernel import build_kernel_spectrum
from logchoquard.semiclassical import PotentialSpec

EULER_GAMMA = 0.5772156649015328606


@pytest.fixture(scope="session")
def gs_record():
    return solve_ground_state(1.0)


@pytest.fixture(scope="session")
def grid256():
    return Grid2D(256, 256, 24.0, 24.0)


@pytest.fixture(scope="session")
def kernel256(grid256):
    return build_kernel_spectrum(grid256)


@pytest.fixture(scope="session")
def base_state(gs_record, grid256, kernel256):
    return ground_state_field(gs_record, grid256, kernel256)


@pytest.fixture(scope="session")
def gs_small():
    return solve_ground_state(1.0, opts=SolveOptions(rmax=8.0, n=800))


@pytest.fixture(scope="session")
def grid160():
    return Grid2D(160, 160, 16.0, 16.0)


@pytest.fixture(scope="session")
def kernel160(grid160):
    return build_kernel_spectrum(grid160)


@pytest.fixture(scope="session")
def base_state_small(gs_small, grid160, kernel160):
    return ground_state_field(gs_small, grid160, kernel160)


@pytest.fixture(scope="session")
def aniso_pot():
    return PotentialSpec("quadratic-min", 1.0, (0.0, 0.0), np.diag([1.0, 4.0]), 1.6)
