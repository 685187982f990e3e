import numpy as np
import pytest

from reebflow import BasicPotential, make_grid, metric_state, reference_state


@pytest.fixture(scope="session")
def grid96():
    return make_grid(96)


@pytest.fixture(scope="session")
def grid128():
    return make_grid(128)


@pytest.fixture(scope="session")
def grid256():
    return make_grid(256)


@pytest.fixture(scope="session")
def ref96(grid96):
    return reference_state(grid96)


@pytest.fixture(scope="session")
def ref128(grid128):
    return reference_state(grid128)


@pytest.fixture(scope="session")
def ref256(grid256):
    return reference_state(grid256)


def psi_bump(grid):
    """The standard manufactured deformation 0.3 (1 - x^2)."""
    return BasicPotential.from_callable(grid, lambda x: 0.3 * (1.0 - x * x))


@pytest.fixture(scope="session")
def psi128(grid128):
    return psi_bump(grid128)


@pytest.fixture(scope="session")
def base128(psi128):
    return metric_state(psi128)


@pytest.fixture(scope="session")
def base96(grid96):
    return metric_state(psi_bump(grid96))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)
