import numpy as np
import pytest

from obscert import potentials, quantum


@pytest.fixture(scope="session")
def grid512():
    return quantum.Grid(dim=1, n=512, length=16.0)


@pytest.fixture(scope="session")
def grid1024():
    return quantum.Grid(dim=1, n=1024, length=16.0)


@pytest.fixture(scope="session")
def free():
    return potentials.free_particle()


@pytest.fixture(scope="session")
def harm():
    return potentials.harmonic()


@pytest.fixture(scope="session")
def dwell():
    return potentials.double_well()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
