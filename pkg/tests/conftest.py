import numpy as np
import pytest

from cqhjlab import Boundary, Grid, harmonic_potential, ho_eigenstate


@pytest.fixture
def periodic_grid():
    return Grid(-12.0, 12.0, 512, Boundary.PERIODIC)


@pytest.fixture
def box_grid():
    return Grid(-8.0, 8.0, 512, Boundary.BOX)


@pytest.fixture
def ho_setup(periodic_grid):
    """Harmonic potential with its lowest analytic eigenstates."""
    V = harmonic_potential(periodic_grid, 1.0)
    pairs = [ho_eigenstate(n, 1.0, periodic_grid) for n in range(4)]
    return periodic_grid, V, pairs


@pytest.fixture
def ho_box_setup(box_grid):
    V = harmonic_potential(box_grid, 1.0)
    pairs = [ho_eigenstate(n, 1.0, box_grid) for n in range(2)]
    return box_grid, V, pairs


def rng(seed=0):
    return np.random.default_rng(seed)
