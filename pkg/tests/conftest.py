"""Shared fixtures and hypothesis profile for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "exactgrowth",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("exactgrowth")


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture(scope="session")
def unit_grid():
    from exactgrowth.radial_core import default_grid

    return default_grid(1.0)
