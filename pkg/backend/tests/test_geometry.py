import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from scipy.stats import kstest

from src.models.errors import GeometryError
from src.utils.geometry import (
    Box,
    CellGrid,
    ParallelBox,
    ball_volume,
    box_interior,
    distance_between_boxes,
    distance_to_box,
    estimate_region_volume,
    intersect_boxes,
    parallel_set_profile_cdf,
    parallel_set_volume_box,
    sphere_radius,
    uniform_point_in_parallel_set,
    uniform_points_in_ball,
    unit_ball_volume,
)
from src.utils.rng import rng_stream

coordinates = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)
points_2d = st.tuples(coordinates, coordinates)


def test_sphere_radius_in_two_dimensions():
    assert sphere_radius(2) == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-15)


@given(st.integers(min_value=1, max_value=20))
def test_unit_volume_ball_and_doubled_radius(d):
    r = sphere_radius(d)
    assert ball_volume(r, d) == pytest.approx(1.0, rel=1e-12)
    assert ball_volume(2.0 * r, d) == pytest.approx(2.0**d, rel=1e-12)


def test_unit_ball_volumes():
    assert unit_ball_volume(0) == pytest.approx(1.0)
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_invalid_inputs_raise_geometry_error():
    with pytest.raises(GeometryError):
        sphere_radius(0)
    with pytest.raises(GeometryError):
        Box((0.0, 0.0), (1.0, 0.0))
    with pytest.raises(GeometryError):
        parallel_set_volume_box(Box.cube(1.0, 2), -1.0)


def test_interior_is_empty_when_a_side_is_at_most_two_r(r2):
    assert box_interior(Box.cube(2.0 * r2, 2), r2) is None
    interior = box_interior(Box.cube(10.0, 2), r2)
    assert interior.low == pytest.approx((r2, r2))
    assert interior.volume == pytest.approx((10.0 - 2.0 * r2) ** 2)


def test_steiner_formula_matches_closed_forms():
    a, b, c, length = 2.0, 3.0, 5.0, 0.7
    square = Box((0.0, 0.0), (a, b))
    assert parallel_set_volume_box(square, 0.0) == pytest.approx(a * b)
    assert parallel_set_volume_box(square, length) == pytest.approx(
        a * b + 2.0 * (a + b) * length + math.pi * length**2
    )
    cube = Box((0.0, 0.0, 0.0), (a, b, c))
    expected = (
        a * b * c
        + 2.0 * (a * b + b * c + c * a) * length
        + math.pi * (a + b + c) * length**2
        + 4.0 / 3.0 * math.pi * length**3
    )
    assert parallel_set_volume_box(cube, length) == pytest.approx(expected)


@given(points_2d)
def test_distance_to_box_vanishes_exactly_inside(x):
    box = Box((-5.0, -5.0), (5.0, 5.0))
    distance = distance_to_box(x, box)
    assert distance >= 0.0
    assert (distance == 0.0) == box.contains(x)


def test_box_distances_and_intersections():
    a = Box((0.0, 0.0), (1.0, 1.0))
    b = Box((4.0, 5.0), (6.0, 6.0))
    assert distance_between_boxes(a, b) == pytest.approx(5.0)
    assert intersect_boxes(a, b) is None
    overlap = intersect_boxes(a, Box((0.5, -1.0), (2.0, 0.5)))
    assert overlap == Box((0.5, 0.0), (1.0, 0.5))


def test_parallel_box_membership_and_erosion():
    region = ParallelBox(Box((4.0, 4.0), (6.0, 6.0)), 2.0, Box.cube(10.0, 2))
    assert region.contains((7.9, 5.0))
    assert not region.contains((8.1, 5.0))
    eroded = region.eroded(0.5)
    assert eroded.radius == pytest.approx(1.5)
    assert eroded.contains((7.4, 5.0))
    assert not eroded.contains((7.6, 5.0))
    shrunk = ParallelBox(Box((4.0, 4.0), (6.0, 6.0))).eroded(0.5)
    assert shrunk.core == Box((4.5, 4.5), (5.5, 5.5))
    assert ParallelBox(Box((4.0, 4.0), (5.0, 5.0))).eroded(0.6) is None


def test_uniform_points_lie_in_the_ball():
    rng = rng_stream(3, 0)
    center = (1.0, -2.0, 0.5)
    for p in uniform_points_in_ball(center, 0.8, 500, rng):
        assert math.dist(p, center) < 0.8


def test_full_membership_gives_the_ball_volume_without_error():
    volume, error = estimate_region_volume(lambda y: True, (0.0, 0.0), 2.0 * sphere_radius(2), 100, rng_stream(1, 0))
    assert volume == pytest.approx(4.0)
    assert error == 0.0


def test_parallel_set_sampler_matches_the_exact_marginal():
    box = Box((0.0, 0.0), (1.5, 0.5))
    length = 0.8
    rng = rng_stream(11, 0)
    xs = np.array([uniform_point_in_parallel_set(box, length, rng)[0] for _ in range(3000)])
    cdf = parallel_set_profile_cdf(box, length, axis=0)
    assert kstest(xs, cdf).pvalue > 1e-3


@hyp_settings(max_examples=50, deadline=None)
@given(st.lists(points_2d, max_size=40, unique=True), points_2d, st.floats(min_value=0.1, max_value=6.0))
def test_cell_grid_neighbors_match_brute_force(stored, query, length):
    grid = CellGrid(2)
    for p in stored:
        grid.insert(p)
    expected = sorted(p for p in stored if math.dist(p, query) < length)
    assert sorted(grid.neighbors_within(query, length)) == expected
    assert grid.any_within(query, length) == bool(expected)
    assert grid.count_within(query, length) == len(expected)
    assert len(grid) == len(stored)


def test_cell_grid_remove():
    grid = CellGrid(2)
    grid.insert((1.0, 1.0))
    grid.remove((1.0, 1.0))
    assert (1.0, 1.0) not in grid
    with pytest.raises(KeyError):
        grid.remove((1.0, 1.0))
