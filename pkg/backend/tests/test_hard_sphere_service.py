import math

import numpy as np
import pytest
from scipy.stats import binomtest

from src.models.configuration import BoundaryCondition, Configuration, ModelParams, StateClass
from src.models.errors import GeometryError, OracleDomainError, SamplerExhaustedError
from src.services.hard_sphere_service import (
    accept_proposals,
    count_pmf_from_samples,
    free_volume_fraction_estimate,
    is_blocked_point,
    is_star_configuration,
    is_valid_configuration,
    oracle_small_domain,
    proposal_window,
    sample_hard_sphere_rejection,
)
from src.utils.geometry import Ball, Box
from src.utils.rng import rng_stream


# --- Validity ---


def test_pairwise_distance_decides_validity(square, r2):
    free = BoundaryCondition.free()
    apart = Configuration(square, [(5.0, 5.0), (5.0 + 2.0 * r2 + 1e-9, 5.0)])
    touching = Configuration(square, [(5.0, 5.0), (5.0 + 2.0 * r2 - 1e-9, 5.0)])
    assert is_valid_configuration(apart, free)
    assert not is_valid_configuration(touching, free)


def test_centers_in_tau_are_invalid(square):
    tau = BoundaryCondition(forbidden_balls=(Ball((5.0, 5.0), 1.0),))
    assert not is_valid_configuration(Configuration(square, [(5.5, 5.0)]), tau)
    assert is_valid_configuration(Configuration(square, [(7.0, 5.0)]), tau)


def test_shell_forbids_centers_near_the_interior_boundary(square, r2):
    tau = BoundaryCondition(forbid_shell=1.0)
    interior = Configuration(square).interior
    assert tau.contains((r2 + 0.5, 5.0), interior)
    assert not tau.contains((5.0, 5.0), interior)


def test_configuration_rejects_centers_outside_the_interior(square):
    with pytest.raises(ValueError):
        Configuration(square, [(0.1, 5.0)])


def test_blocked_point_covers_boundary_strip_and_neighbourhoods(square, r2):
    config = Configuration(square, [(5.0, 5.0)])
    free = BoundaryCondition.free()
    assert is_blocked_point((0.1, 5.0), config, free)
    assert is_blocked_point((5.0 + 1.9 * r2, 5.0), config, free)
    assert not is_blocked_point((5.0 + 2.1 * r2, 5.0), config, free)
    with pytest.raises(GeometryError):
        is_blocked_point((11.0, 5.0), config, free)


# --- Omega* ---


def test_tight_triangle_is_not_a_star_configuration(square, r2):
    side = 0.5 * r2
    centers = [(5.0, 5.0), (5.0 + side, 5.0), (5.0 + side / 2.0, 5.0 + side * math.sqrt(3.0) / 2.0)]
    verdict = is_star_configuration(Configuration(square, centers, StateClass.OMEGA_STAR))
    assert not verdict.valid
    assert verdict.exact


def test_wide_triangle_is_a_star_configuration(square, r2, rng):
    side = 1.9 * r2
    centers = [(5.0, 5.0), (5.0 + side, 5.0), (5.0 + side / 2.0, 5.0 + side * math.sqrt(3.0) / 2.0)]
    verdict = is_star_configuration(Configuration(square, centers, StateClass.OMEGA_STAR), rng, samples=2000)
    assert verdict.valid
    assert verdict.candidate_triples == 1
    assert not verdict.exact
    assert 0.0 < verdict.miss_probability <= 1.0


def test_pairs_never_violate_omega_star(square, r2):
    config = Configuration(square, [(5.0, 5.0), (5.0 + 0.1 * r2, 5.0)], StateClass.OMEGA_STAR)
    verdict = is_star_configuration(config)
    assert verdict.valid and verdict.exact


# --- Oracle ---


def test_single_sphere_oracle_has_closed_form(single_sphere_params):
    interior_volume = single_sphere_params.interior.volume
    result = oracle_small_domain(single_sphere_params)
    assert result.partition_function == pytest.approx(1.0 + interior_volume, rel=1e-12)
    assert result.count_pmf[0] == pytest.approx(1.0 / (1.0 + interior_volume), rel=1e-12)
    assert sum(result.count_pmf) == pytest.approx(1.0)


def test_oracle_refuses_domains_that_hold_more_spheres(square):
    with pytest.raises(OracleDomainError) as exc:
        oracle_small_domain(ModelParams(1.0, 2, square))
    assert exc.value.diameter > 0.0


def test_two_sphere_oracle_gives_a_normalised_law(two_sphere_box):
    result = oracle_small_domain(ModelParams(2.0, 2, two_sphere_box), max_spheres=2, quadrature_cells=60)
    assert len(result.count_pmf) == 3
    assert sum(result.count_pmf) == pytest.approx(1.0)
    assert result.terms[2] > 0.0


def test_empty_interior_oracle_is_the_empty_configuration(r2):
    result = oracle_small_domain(ModelParams(1.0, 2, Box.cube(2.0 * r2, 2)))
    assert result.partition_function == 1.0
    assert result.count_pmf == (1.0, 0.0)


# --- Rejection sampler ---


def test_rejection_sampler_matches_the_single_sphere_oracle(single_sphere_params):
    p_empty = oracle_small_domain(single_sphere_params).count_pmf[0]
    rng = rng_stream(77, 0)
    samples = 4000
    empties = sum(1 for _ in range(samples) if len(sample_hard_sphere_rejection(single_sphere_params, rng)) == 0)
    assert binomtest(empties, samples, p_empty).pvalue > 1e-4


def test_rejection_sampler_matches_the_two_sphere_oracle(two_sphere_box):
    params = ModelParams(2.0, 2, two_sphere_box)
    p_empty = oracle_small_domain(params, max_spheres=2, quadrature_cells=80).count_pmf[0]
    rng = rng_stream(78, 0)
    samples = 3000
    counts = [len(sample_hard_sphere_rejection(params, rng)) for _ in range(samples)]
    assert max(counts) <= 2
    assert binomtest(counts.count(0), samples, p_empty).pvalue > 1e-4


def test_rejection_samples_are_valid(square, rng):
    params = ModelParams(0.05, 2, square)
    for _ in range(20):
        assert is_valid_configuration(sample_hard_sphere_rejection(params, rng), params.tau)


def test_rejection_sampler_reports_exhaustion(square, rng):
    with pytest.raises(SamplerExhaustedError) as exc:
        sample_hard_sphere_rejection(ModelParams(50.0, 2, square), rng, max_attempts=3)
    assert exc.value.attempts == 3
    assert "(after 3 attempts)" in str(exc.value)
    assert exc.value.diagnostics["poisson_mean"] > 0.0


def test_zero_fugacity_gives_the_empty_configuration(square, rng):
    assert len(sample_hard_sphere_rejection(ModelParams(0.0, 2, square), rng)) == 0


# --- Helpers ---


def test_proposal_window_is_clipped_to_the_interior(square, r2):
    interior = Configuration(square).interior
    window = proposal_window((r2, 5.0), 1.0, interior)
    assert window.low == pytest.approx((r2, 4.0))
    assert window.high == pytest.approx((r2 + 1.0, 6.0))
    assert proposal_window((5.0, 5.0), 0.0, interior) is None


def test_accept_proposals_thins_then_checks_overlaps(r2):
    forbidden = lambda x: x[0] < 0.0  # noqa: E731
    assert accept_proposals([(-1.0, 0.0), (0.0, 0.0), (3.0 * r2, 0.0)], forbidden, 2.0 * r2) == [
        (0.0, 0.0),
        (3.0 * r2, 0.0),
    ]
    assert accept_proposals([(0.0, 0.0), (r2, 0.0)], forbidden, 2.0 * r2) is None


def test_count_pmf_is_padded():
    pmf = count_pmf_from_samples([0, 1, 1, 2], max_count=3)
    np.testing.assert_allclose(pmf, [0.25, 0.5, 0.25, 0.0])


def test_free_volume_of_the_empty_configuration_is_the_interior_fraction(square, rng):
    config = Configuration(square)
    fraction, error = free_volume_fraction_estimate(config, BoundaryCondition.free(), 20_000, rng)
    expected = config.interior.volume / square.volume
    assert abs(fraction - expected) <= 4.0 * error
