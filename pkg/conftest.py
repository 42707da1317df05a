import numpy as np
import pytest

from hustab.numerics import NUMERICS, NumericSettings


@pytest.fixture
def settings() -> NumericSettings:
    return NUMERICS

@pytest.fixture
def coarse() -> NumericSettings:
    """
    Fewer nodes and a looser Picard tolerance, for tests that run many solves
    """
    return NUMERICS.withOverrides({"nodes": 1024, "picard_tol": 1e-8})

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)
