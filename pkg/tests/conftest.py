import numpy as np
import pytest

from nlkg.grid import Grid
from nlkg.soliton import Boost, Nonlinearity, groundstate
from nlkg.spectral import build_pack


@pytest.fixture(scope="session")
def nl_cubic():
    return Nonlinearity.power(3, 1.0)


@pytest.fixture(scope="session")
def grid_small():
    return Grid(n=1024, length=40.0)


@pytest.fixture(scope="session")
def gs_small(nl_cubic, grid_small):
    return groundstate(nl_cubic, grid_small)


@pytest.fixture(scope="session")
def pack_rest(gs_small, nl_cubic, grid_small):
    """Spectral package at beta = 0 on the small grid."""
    return build_pack(gs_small, nl_cubic, Boost(0.0), grid_small)


@pytest.fixture(scope="session")
def pack_boosted(gs_small, nl_cubic, grid_small):
    """Spectral package at beta = 0.3 on the small grid."""
    return build_pack(gs_small, nl_cubic, Boost(0.3), grid_small)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
