import numpy as np
import pytest

from esbgk.grid import build_collision_basis, build_velocity_grid


@pytest.fixture(scope="session")
def grid32():
    return build_velocity_grid(8.0, 32)


@pytest.fixture(scope="session")
def basis32(grid32):
    return build_collision_basis(grid32)


@pytest.fixture(scope="session")
def grid16():
    # coarse grid for tests whose tolerances are not pinned to the default
    return build_velocity_grid(8.0, 16)


@pytest.fixture(scope="session")
def basis16(grid16):
    return build_collision_basis(grid16)


def direct_quadrature(grid, values, weight=None):
    """Independent summation oracle: plain np.sum, no kernel code path."""
    v = np.asarray(values, dtype=float)
    if weight is not None:
        v = v * weight
    return float(np.sum(v * grid.weights))
