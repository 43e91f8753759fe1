import numpy as np
import pytest

from landau import grid as G
from landau import scenarios as S
from landau.kernel import KernelParams


@pytest.fixture(scope="session")
def grid16():
    return G.VelocityGrid(16, 6.0)


@pytest.fixture(scope="session")
def grid24():
    return G.VelocityGrid(24, 6.0)


@pytest.fixture(scope="session")
def params():
    return KernelParams(1.0, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def bump16(grid16):
    return S.two_bump(grid16)
