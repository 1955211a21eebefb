"""Session-scoped fixtures shared across the suite.

Three grids, matched to the measured defect laws of the periodic box:

  work grid   (4096, 400)     dx 0.098 — substrate and ground-state tests
  kernel grid (2^19, 12800)   dx 0.024 — operator, kernel elements, profiles
  dense grid  (2048, 64)      dx 0.031 — whole-spectrum (eigenvalue) work

The kernel/path grids keep dx at 0.024 because the equilibrium cube's
spectral tail aliases badly above that, and the box at 12800 because the
x-weighted seam defects in the structural identities shrink like 1/L^2.
Imports happen inside the fixtures so substrate tests run even while later
modules are under construction.
"""

import numpy as np
import pytest

from halfwave.grids import Grid

WORK_N = 4096
WORK_L = 400.0
KERNEL_N = 2**19
KERNEL_L = 12800.0
DENSE_N = 2048
DENSE_L = 64.0
FINE_N = 2**20
FINE_L = 25600.0


@pytest.fixture(scope="session")
def grid():
    return Grid(WORK_N, WORK_L)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def ground(grid):
    from halfwave.ground_state import solve_petviashvili

    return solve_petviashvili(grid)


@pytest.fixture(scope="session")
def kernel_ground():
    from halfwave.ground_state import solve_petviashvili

    return solve_petviashvili(Grid(KERNEL_N, KERNEL_L))


@pytest.fixture(scope="session")
def operator(kernel_ground):
    from halfwave.linearized import build

    return build(kernel_ground)


@pytest.fixture(scope="session")
def kernel(operator):
    from halfwave.linearized import kernel_elements

    return kernel_elements(operator)


@pytest.fixture(scope="session")
def profiles_set(operator, kernel):
    from halfwave.profiles import build_profiles

    return build_profiles(operator, kernel)


@pytest.fixture(scope="session")
def profiles_fine():
    """Refinement partner for the profile build: double the box and count.

    Shared by the convergence invariant and the acceptance checks so the
    52-second build happens once per session.
    """
    from halfwave.ground_state import solve_petviashvili
    from halfwave.linearized import build, kernel_elements
    from halfwave.profiles import build_profiles

    op = build(solve_petviashvili(Grid(FINE_N, FINE_L)))
    return build_profiles(op, kernel_elements(op))


@pytest.fixture(scope="session")
def dense_operator():
    from halfwave.ground_state import solve_petviashvili
    from halfwave.linearized import build

    gs = solve_petviashvili(Grid(DENSE_N, DENSE_L))
    return build(gs)
