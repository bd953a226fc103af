import numpy as np
import pytest
from hypothesis import settings

from critwave.config import Thresholds
from critwave.grids import RadialGrid
from critwave.spectral import build_spectral_data

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def spectral():
    """Spectral data with the shooting cross-check (built once, ~10 s)."""
    return build_spectral_data(cross_check=True)


@pytest.fixture(scope="session")
def static_grid():
    return RadialGrid(3, 200.0, 4096, "sinh", 6.0)


@pytest.fixture(scope="session")
def thresholds():
    return Thresholds()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240801)
