"""Shared fixtures: seeded streams and standard domains."""

import pytest

from src.models.configuration import ModelParams
from src.services.hard_sphere_service import single_sphere_side, two_sphere_side
from src.utils.geometry import Box, sphere_radius
from src.utils.rng import rng_stream


@pytest.fixture
def rng():
    return rng_stream(20240611, 0)


@pytest.fixture
def r2():
    return sphere_radius(2)


@pytest.fixture
def square():
    """d = 2 domain of side 10 (n = 100)."""
    return Box.cube(10.0, 2)


@pytest.fixture
def single_sphere_box():
    return Box.cube(single_sphere_side(2), 2)


@pytest.fixture
def two_sphere_box():
    return Box.cube(two_sphere_side(2), 2)


@pytest.fixture
def single_sphere_params(single_sphere_box):
    return ModelParams(1.0, 2, single_sphere_box)
