import math

import pytest

from src.models.configuration import BoundaryCondition, ModelParams
from src.models.errors import GeometryError, PreconditionError
from src.models.schemas import Comparison, Kernel, Verdict
from src.services.bounds_service import max_eta
from src.services.experiments_service import (
    boundary_difference_distance,
    contraction_experiment,
    density_report,
    density_sweep,
    disagreement_experiment,
    exact_sampling_feasible,
    free_volume_identity_check,
    heat_bath_coupling_experiment,
    identity_verdict,
    map_replicas,
    mixing_time_check,
    parallel_set_check,
    premetric_range_check,
    projected_mixing_experiment,
    separated_boxes,
    spatial_mixing_scan,
    stationarity_check,
)
from src.utils.geometry import Ball, Box, box_interior, sphere_radius


def _square_of(side, lam):
    return ModelParams(lam, 2, Box.cube(side, 2))


# --- Plumbing ---


def test_map_replicas_keeps_id_order():
    assert map_replicas(abs, [-3, 1, -2], workers=1) == [3, 1, 2]


def test_exact_sampling_guard(square):
    assert exact_sampling_feasible(ModelParams(0.05, 2, square))
    assert not exact_sampling_feasible(ModelParams(0.5, 2, square))
    assert exact_sampling_feasible(ModelParams(0.0, 2, square))


def test_density_report_of_a_constant_series(square):
    report = density_report("sample_density", [0.1] * 20, ModelParams(0.1, 2, square), seed=1)
    assert report.estimate == pytest.approx(0.1)
    assert report.stderr == 0.0
    assert report.comparison is Comparison.GE
    assert report.verdict is Verdict.PASS


# --- Contraction ---


def test_contraction_needs_lambda_below_the_fugacity_bound(square):
    with pytest.raises(PreconditionError):
        contraction_experiment(ModelParams(0.5, 2, square), trials=1)
    with pytest.raises(PreconditionError):
        contraction_experiment(ModelParams(0.0, 2, square), trials=1)


def test_contraction_needs_a_non_empty_interior():
    with pytest.raises(PreconditionError):
        contraction_experiment(_square_of(1.0, 0.25), trials=1)


def test_contraction_case_breakdown_is_consistent():
    report, breakdown = contraction_experiment(
        _square_of(5.0, 0.25), trials=6, burn_in=50, seed=3, samples=32, nested_samples=4, replicas=2
    )
    assert report.name == "contraction"
    assert report.replicas == 2
    assert report.bound == pytest.approx(-0.0426667, rel=1e-5)
    assert breakdown.total == pytest.approx(breakdown.a1 + breakdown.a2 + breakdown.a3 + breakdown.a4)
    assert breakdown.a1 < 0.0
    assert breakdown.a3 <= 0.0
    assert 0.0 <= report.params["a4_measured"] <= breakdown.a4 + 1e-15
    assert 0.0 <= report.params["a1_event_frequency"] <= 1.0
    assert report.estimate == pytest.approx(breakdown.total)


def test_contraction_verdict_takes_a4_at_its_upper_bound():
    report, breakdown = contraction_experiment(
        _square_of(5.0, 0.25), trials=8, burn_in=100, seed=13, samples=48, nested_samples=4, replicas=2
    )
    p = report.params
    assert report.estimate == pytest.approx(p["a1"] + p["a2"] + p["a3"] + breakdown.a4)
    assert p["a4"] == breakdown.a4
    assert p["measured_total"] <= report.estimate + 1e-12
    # blocked and free parts of B_2r(v) add up to 2^d, so the bounded total is the drift bound
    assert report.estimate == pytest.approx(report.bound, rel=1e-9)
    assert report.verdict is Verdict.PASS


# --- Disagreement ---


def test_separated_boxes_realise_the_separation(square, r2):
    a, b = separated_boxes(square, 8.0 * r2)
    assert a.high[0] == pytest.approx(3.0 * r2)
    assert b.low[0] + r2 - a.high[0] == pytest.approx(8.0 * r2)
    with pytest.raises(GeometryError):
        separated_boxes(Box.cube(4.0, 2), 8.0 * r2)


def test_agreeing_chains_never_disagree(square, r2):
    params = ModelParams(0.25, 2, square)
    a, b = separated_boxes(square, 8.0 * r2)
    report = disagreement_experiment(params, a, b, max_eta(8.0 * r2, 2), trials=20, seed=1, x0=[], y0=[])
    assert report.estimate == 0.0
    assert report.verdict is Verdict.PASS
    assert report.params["steps"] == 1


def test_default_disagreement_stays_inside_a(square, r2):
    params = ModelParams(0.25, 2, square)
    a, b = separated_boxes(square, 8.0 * r2)
    report = disagreement_experiment(params, a, b, max_eta(8.0 * r2, 2), trials=10, seed=2, replicas=2)
    assert report.estimate == 0.0
    assert report.bound == pytest.approx(b.volume * math.exp(-2.0))


def test_disagreement_from_differing_starts_meets_its_bound(r2):
    domain = Box.cube(30.0, 2)
    params = ModelParams(0.25, 2, domain)
    a, wide = separated_boxes(domain, 8.0 * r2)
    b = Box((wide.low[0], 14.0), (wide.low[0] + 1.5, 15.5))
    report = disagreement_experiment(params, a, b, max_eta(8.0 * r2, 2) / 2.0, trials=200, seed=14, replicas=2)
    assert report.params["s"] == pytest.approx(8.0 * r2)
    assert report.params["steps"] == 7
    assert report.bound == pytest.approx(2.25 * math.exp(-2.0))
    assert report.verdict is not Verdict.FAIL


def test_disagreement_rejects_eta_above_the_maximum(square, r2):
    params = ModelParams(0.25, 2, square)
    a, b = separated_boxes(square, 8.0 * r2)
    with pytest.raises(PreconditionError) as exc:
        disagreement_experiment(params, a, b, 0.02, trials=1)
    assert exc.value.eta_max == pytest.approx(0.016917, abs=1e-6)


def test_zero_eta_runs_no_steps(square, r2):
    params = ModelParams(0.25, 2, square)
    a, b = separated_boxes(square, 8.0 * r2)
    report = disagreement_experiment(params, a, b, 1e-6, trials=5)
    assert report.params["steps"] == 0
    assert report.estimate == 0.0


# --- Density ---


def test_density_at_zero_fugacity_is_zero():
    (report,) = density_sweep(2, [0.0], [4.0], steps=200, burn_in=0, replicas=2)
    assert report.name == "density_easy"
    assert report.estimate == 0.0
    assert report.verdict is Verdict.PASS


def test_density_sweep_reports_both_bounds():
    reports = density_sweep(2, [0.5], [4.0, 5.0], steps=2000, burn_in=500, replicas=2, seed=4)
    assert [r.name for r in reports] == ["density_easy", "density_jjp"] * 2
    assert all(r.estimate > 0.0 for r in reports)
    assert reports[0].params["interior_fraction"] == pytest.approx((4.0 - 2.0 * sphere_radius(2)) ** 2 / 16.0)


@pytest.mark.slow
def test_density_meets_both_lower_bounds():
    reports = density_sweep(2, [0.25], [10.0], steps=20_000, replicas=2, seed=15)
    assert [r.name for r in reports] == ["density_easy", "density_jjp"]
    assert reports[0].bound > reports[1].bound > 0.0
    assert all(r.verdict is not Verdict.FAIL for r in reports)


def test_density_sweep_rejects_negative_fugacities():
    with pytest.raises(PreconditionError):
        density_sweep(2, [-0.1], [4.0], steps=10)


# --- Stationarity ---


def test_stationarity_at_zero_fugacity(single_sphere_box):
    report = stationarity_check(ModelParams(0.0, 2, single_sphere_box), steps=100, burn_in=0)
    assert report.estimate == 0.0
    assert report.verdict is Verdict.PASS


def test_heat_bath_stationarity_needs_a_radius(single_sphere_params):
    with pytest.raises(PreconditionError):
        stationarity_check(single_sphere_params, Kernel.HEAT_BATH, steps=10)


@pytest.mark.slow
def test_heat_bath_chain_is_stationary_on_a_two_sphere_box(two_sphere_box, r2):
    params = ModelParams(2.0, 2, two_sphere_box)
    report = stationarity_check(params, Kernel.HEAT_BATH, steps=40_000, length=3.0 * r2, replicas=2, seed=16)
    assert report.params["max_spheres"] == 2
    assert report.verdict is Verdict.PASS


@pytest.mark.slow
def test_single_center_chain_is_stationary_for_the_oracle(single_sphere_params):
    report = stationarity_check(single_sphere_params, steps=100_000, replicas=2, seed=11)
    assert report.verdict is Verdict.PASS


# --- Spatial mixing scan ---


def test_boundary_difference_distance(square):
    interior = box_interior(square, sphere_radius(2))
    subregion = Box((4.0, 4.0), (6.0, 6.0))
    free = BoundaryCondition.free()
    assert boundary_difference_distance(free, free, subregion, interior) == math.inf
    near = free.with_balls([Ball((7.0, 5.0), 0.5)])
    assert boundary_difference_distance(free, near, subregion, interior) == pytest.approx(0.5)
    shell = BoundaryCondition(forbid_shell=1.0)
    expected = 4.0 - sphere_radius(2) - 1.0
    assert boundary_difference_distance(free, shell, subregion, interior) == pytest.approx(expected)


def test_scan_orders_pairs_by_distance():
    params = _square_of(6.0, 0.1)
    subregion = Box((2.0, 2.0), (4.0, 4.0))
    free = BoundaryCondition.free()
    far = free.with_balls([Ball((5.2, 5.2), 0.3)])
    near = free.with_balls([Ball((4.4, 3.0), 0.3)])
    reports = spatial_mixing_scan(params, subregion, [(free, far), (free, near)], samples_per_pair=40, seed=5)
    assert [r.name for r in reports] == ["ssm_scan", "ssm_scan", "ssm_scan_decay"]
    assert reports[0].params["pair_index"] == 1
    assert reports[0].params["distance"] < reports[1].params["distance"]
    assert reports[0].bound == 1.0
    assert all(r.note == "evidence, not certification" for r in reports)


def test_scan_needs_the_subregion_inside_the_domain():
    with pytest.raises(GeometryError):
        spatial_mixing_scan(_square_of(6.0, 0.1), Box((4.0, 4.0), (7.0, 5.0)), [], samples_per_pair=1)


# --- Free volume, mixing time, parallel sets, pre-metric ---


def test_free_volume_identity_needs_positive_lambda(square):
    with pytest.raises(PreconditionError):
        free_volume_identity_check(ModelParams(0.0, 2, square), steps=10)


def test_free_volume_identity_bound_is_three_standard_errors():
    report = free_volume_identity_check(_square_of(5.0, 0.2), steps=500, burn_in=100, samples=64, stride=25, seed=6)
    assert report.name == "free_volume_identity"
    assert report.bound == pytest.approx(3.0 * report.stderr)
    assert report.params["stride"] == 25


def test_identity_verdict_has_no_inconclusive_band():
    assert identity_verdict(0.25, 0.1) is Verdict.PASS
    assert identity_verdict(-0.25, 0.1) is Verdict.PASS
    assert identity_verdict(0.45, 0.1) is Verdict.FAIL
    assert identity_verdict(0.0, 0.0) is Verdict.PASS


@pytest.mark.slow
def test_free_volume_identity_holds_on_a_side_ten_square():
    report = free_volume_identity_check(_square_of(10.0, 0.25), steps=50_000, stride=100, replicas=2, seed=17)
    assert report.params["rho_hat"] > 0.0
    assert report.verdict is not Verdict.FAIL


def test_mixing_time_check_reports_both_starts():
    report = mixing_time_check(2, 0.5, 0.05, replicas=30, seed=7)
    assert set(report.params["tv_by_start"]) == {"empty", "one_sphere"}
    assert report.bound == 0.05
    assert report.params["lambda"] == 0.25


@pytest.mark.slow
def test_mixing_time_ceiling_is_met_on_a_single_sphere_box():
    assert mixing_time_check(2, 0.5, 0.05, replicas=2000, seed=8).verdict is not Verdict.FAIL


@pytest.mark.parametrize("d", [2, 3])
def test_parallel_set_inequalities_hold(d):
    reports = parallel_set_check(d, boxes=50, seed=9)
    assert [r.name for r in reports] == ["parallel_set", "parallel_set_interior"]
    assert all(r.verdict is Verdict.PASS and r.estimate <= 1.0 for r in reports)


def test_premetric_weights_stay_in_range():
    lower, upper = premetric_range_check(2, edges=5, seed=10, samples=64, burn_in=50)
    assert lower.verdict is Verdict.PASS
    assert upper.verdict is Verdict.PASS
    assert lower.bound == 2.0 and upper.bound == 4.0


# --- Heat-bath coupling and projected mixing ---


def test_heat_bath_coupling_counts_every_trial():
    params = _square_of(6.0, 0.1)
    coupling, boundary = heat_bath_coupling_experiment(params, 2.0 * params.r, trials=20, seed=11, burn_in=20, replicas=2)
    assert coupling.name == "heat_bath_coupling"
    assert boundary.name == "heat_bath_boundary_case"
    assert sum(coupling.params["case_counts"].values()) == 20
    assert coupling.params["k"] == pytest.approx(1.0)


def test_heat_bath_coupling_rejects_short_radii():
    params = _square_of(6.0, 0.1)
    with pytest.raises(GeometryError):
        heat_bath_coupling_experiment(params, 0.5 * params.r, trials=1)


def test_projected_mixing_needs_radius_above_r():
    params = _square_of(6.0, 0.1)
    threshold = math.exp(-2.0) * 4.0**-3
    with pytest.raises(PreconditionError):
        projected_mixing_experiment(params, Box((2.0, 2.0), (4.0, 4.0)), 0.5 * threshold, trials=1)


def test_projected_mixing_without_steps_never_disagrees():
    params = _square_of(6.0, 0.1)
    threshold = math.exp(-2.0) * 4.0**-3
    report = projected_mixing_experiment(params, Box((2.0, 2.0), (4.0, 4.0)), 2.0 * threshold, trials=10, seed=12)
    assert report.params["steps"] == 0
    assert report.params["radius"] == pytest.approx(2.0 * params.r)
    assert report.estimate == 0.0


def test_projected_mixing_with_steps_meets_its_bound():
    params = _square_of(20.0, 0.05)
    subregion = Box((9.0, 9.0), (11.0, 11.0))
    report = projected_mixing_experiment(params, subregion, 0.016, trials=40, seed=18, replicas=2)
    assert report.params["steps"] == 6
    assert report.params["exact_start"] is True
    assert report.bound == pytest.approx(4.0 * math.exp(-report.params["radius"] / (4.0 * params.r)))
    assert report.bound < 1.0
    assert report.verdict is not Verdict.FAIL
