import numpy as np
import pytest

from conftest import lattice_set, plain_field, single_ball
from holehom.corrector import compute_bundle
from holehom.elliptic import SolverConfig
from holehom.errors import SingularGram
from holehom.field import Grid, rasterize
from holehom.geometry import LatticeIIDSampler, RadiusLaw
from holehom.quantify import (
    ExcessDecayResult,
    ExcessResult,
    caccioppoli_check,
    corrector_growth_profile,
    decay_quantity,
    dyadic_radii,
    edge_chi,
    excess,
    excess_decay_profile,
    exponential_weight,
    fit_excess_slope,
    growth_regime,
    hole_filling_ratio,
    implied_moment_exponent,
    locality_probe,
    matrix_point,
    mean_value_check,
    mean_value_ratios,
    nondegenerate_excess_rows,
    nondegeneracy_bounds,
    normalized_oscillation,
    oscillation_probe,
    oscillation_shape_fit,
    oscillation_sum,
    quartic_bump,
    quartic_cutoff,
    regularity_radius,
    select_growth_model,
    trial_gradient,
    weighted_energy,
    weighted_mean,
)

TIGHT = SolverConfig(relative_tolerance=1e-12)


@pytest.fixture(scope="module")
def lattice_bundle():
    return compute_bundle(rasterize(lattice_set(), 64), T=16.0, cfg=TIGHT)


@pytest.fixture(scope="module")
def plain_bundle():
    return compute_bundle(plain_field(64, box_side=4.0), T=16.0)


def test_dyadic_radii():
    assert dyadic_radii(Grid(2, 64, 4.0)) == [0.125, 0.25, 0.5, 1.0, 2.0]
    assert dyadic_radii(Grid(2, 64, 4.0), smallest=0.3, largest=1.5) == [0.5, 1.0]


def test_excess_vanishes_on_the_corrected_family(lattice_bundle):
    rng = np.random.default_rng(0)
    for _ in range(5):
        xi = rng.standard_normal(2)
        grad_u = trial_gradient(lattice_bundle, xi) * edge_chi(lattice_bundle.field)
        for r in (0.5, 1.0, 2.0):
            result = excess(grad_u, lattice_bundle, r)
            assert result.value <= 1e-9
            assert np.allclose(result.xi, xi, atol=1e-8)


def test_excess_of_zero_gradient_is_zero(lattice_bundle):
    result = excess(np.zeros((2,) + lattice_bundle.grid.shape), lattice_bundle, 1.0)
    assert result.value == 0.0
    assert result.energy == 0.0
    assert np.allclose(result.xi, 0.0)


def test_excess_is_bounded_by_the_energy(lattice_bundle):
    grad_u = np.random.default_rng(1).standard_normal((2,) + lattice_bundle.grid.shape) * edge_chi(lattice_bundle.field)
    result = excess(grad_u, lattice_bundle, 1.0)
    assert 0.0 <= result.value <= result.energy


def test_excess_radius_below_two_cells():
    bundle = compute_bundle(plain_field(16), T=1.0)
    with pytest.raises(ValueError):
        excess(np.zeros((2, 16, 16)), bundle, 0.05)


def test_excess_inside_a_hole_is_singular():
    bundle = compute_bundle(rasterize(single_ball(0.25), 32), T=1.0, with_sigma=False, with_aux=False)
    with pytest.raises(SingularGram):
        excess(np.zeros((2, 32, 32)), bundle, 1.0 / 16.0, center=(0.5, 0.5))


def test_nondegeneracy_of_plain_medium(plain_bundle):
    low, high, constant = nondegeneracy_bounds(plain_bundle, 1.0)
    assert low == pytest.approx(1.0)
    assert high == pytest.approx(1.0)
    assert constant == pytest.approx(1.0)


def test_normalized_oscillation_of_linear_function():
    grid = Grid(2, 256, 1.0)
    x = grid.displacement_from((0.0, 0.0))[0]
    assert normalized_oscillation(np.ones((1,) + grid.shape), grid, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert normalized_oscillation(x[None], grid, 0.3) == pytest.approx(0.25, rel=0.02)


def test_regularity_radius_of_plain_medium(plain_bundle):
    result = regularity_radius(plain_bundle.phi_ext_stack(), plain_bundle.sigma_stack(), plain_bundle.grid)
    assert result.value == 0.125
    assert result.is_finite


def test_regularity_radius_is_infinite_for_strict_threshold(lattice_bundle):
    result = regularity_radius(lattice_bundle.phi_ext_stack(), lattice_bundle.sigma_stack(), lattice_bundle.grid, threshold_C=1e30)
    assert not result.is_finite
    assert len(result.rows) == 5


def test_regularity_radius_rejects_bad_threshold(plain_bundle):
    with pytest.raises(ValueError):
        regularity_radius(plain_bundle.phi_ext_stack(), plain_bundle.sigma_stack(), plain_bundle.grid, threshold_C=0.0)


@pytest.mark.parametrize("model,values", [
    ("constant", lambda r: np.full_like(r, 1.7)),
    ("log", lambda r: 3.0 * np.log(2.0 + r)),
    ("power", lambda r: 0.5 * r ** 0.7),
])
def test_growth_model_selection(model, values):
    radii = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    fit = select_growth_model(radii, values(radii))
    assert fit.model == model


def test_growth_model_fit_parameters():
    radii = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    fit = select_growth_model(radii, 0.5 * radii ** 0.7)
    assert fit.parameters["power_theta"] == pytest.approx(0.7)
    assert fit.parameters["power_c"] == pytest.approx(0.5)


def test_growth_model_needs_three_rows():
    with pytest.raises(ValueError):
        select_growth_model([1.0, 2.0], [1.0, 1.0])


def test_zero_corrector_grows_like_a_constant(plain_bundle):
    rows, fit = corrector_growth_profile(plain_bundle.phi_ext_stack(), plain_bundle.grid)
    assert all(row.value == 0.0 for row in rows)
    assert fit.model == "constant"


@pytest.mark.parametrize("eps,dimension,expected", [
    (0.5, 2, ("power", 0.5)),
    (1.0, 2, ("log", 0.0)),
    (0.9, 3, ("bounded", 0.0)),
])
def test_growth_regime(eps, dimension, expected):
    regime, exponent = growth_regime(eps, dimension)
    assert regime == expected[0]
    assert exponent == pytest.approx(expected[1])


def test_implied_moment_exponent():
    assert implied_moment_exponent(1.0, 2) == 0.5
    assert implied_moment_exponent(0.5, 2) == 0.5
    assert implied_moment_exponent(0.2, 2, beta=0.5) == pytest.approx(0.3125)


def test_hole_filling_without_holes_is_volume_scaling(plain_bundle):
    result = hole_filling_ratio(plain_bundle)
    assert result.eps_hat == pytest.approx(1.0, abs=0.02)
    assert result.regime == "log"
    assert result.implied_gamma == 0.5
    assert result.outer_radius == 2.0
    assert [R for R, _ in result.rows] == [0.125, 0.25, 0.5, 1.0, 2.0]


def test_hole_filling_on_perforated_sample(lattice_bundle):
    result = hole_filling_ratio(lattice_bundle, center=(0.5, 0.5))
    assert result.eps_hat > 0.0
    energies = [energy for _, energy in result.rows]
    assert energies == sorted(energies)


def test_hole_filling_at_a_hole_center():
    holes = LatticeIIDSampler(4, 2, RadiusLaw("point", value=0.2)).sample(0)
    result = hole_filling_ratio(compute_bundle(rasterize(holes, 64), T=16.0, with_sigma=False, with_aux=False))
    assert np.isfinite(result.eps_hat)
    assert result.eps_hat > 0.0
    assert len(result.rows) == 5
    assert result.rows[0][1] == 0.0


def test_hole_filling_inside_one_hole_is_rejected():
    bundle = compute_bundle(rasterize(single_ball(0.45), 64), T=0.04, with_sigma=False, with_aux=False)
    with pytest.raises(ValueError, match="meet the matrix"):
        hole_filling_ratio(bundle, center=(0.5, 0.5))


@pytest.mark.slow
def test_caccioppoli_ratio_is_stable_under_refinement():
    ratios = [
        caccioppoli_check(compute_bundle(rasterize(lattice_set(), n), T=16.0, with_aux=False), 0, 1.0, 0.5, center=(0.5, 0.5))
        for n in (64, 128)
    ]
    assert ratios[1] == pytest.approx(ratios[0], rel=0.2)


def test_caccioppoli_ratio_without_holes():
    bundle = compute_bundle(plain_field(256), T=1.0, with_sigma=False, with_aux=False)
    R, rho = 0.4, 0.2
    expected = 4.0 * rho ** 2 * (R - rho) ** 2 / R ** 4
    assert caccioppoli_check(bundle, 0, R, rho) == pytest.approx(expected, rel=0.03)


def test_caccioppoli_needs_ordered_radii(plain_bundle):
    with pytest.raises(ValueError):
        caccioppoli_check(plain_bundle, 0, 1.0, 1.5)
    with pytest.raises(ValueError):
        caccioppoli_check(plain_bundle, 0, 3.0, 1.0)


def test_weighted_mean_of_constant():
    field = plain_field(64, box_side=4.0)
    F, ratio = weighted_mean(np.full(field.grid.shape, 3.0), field, 1.0)
    assert F == pytest.approx(3.0)
    assert ratio == 0.0


def test_weighted_mean_rejects_large_radius(lattice_field):
    with pytest.raises(ValueError):
        weighted_mean(np.zeros(lattice_field.grid.shape), lattice_field, 3.0)


def test_exponential_weight_mass():
    grid = Grid(2, 256, 8.0)
    weight, mass = exponential_weight(grid, 1.0)
    assert mass == pytest.approx(1.0 - 5.0 * np.exp(-4.0), rel=0.02)
    assert grid.cell_volume * weight.sum() == pytest.approx(1.0)


def test_cutoff_and_bump_shapes():
    grid = Grid(2, 64, 1.0)
    cutoff = quartic_cutoff(grid, (0.5, 0.5), 0.25)
    distance = grid.distance_from((0.5, 0.5))
    assert np.all(cutoff[distance <= 0.125] == 1.0)
    assert np.all(cutoff[distance >= 0.25] == 0.0)
    bump = quartic_bump(grid, None, 0.2)
    assert grid.cell_volume * np.sum(bump ** 2) == pytest.approx(0.2 ** -2)


def test_weighted_energy_of_plain_medium_vanishes(plain_bundle):
    energy = weighted_energy(plain_bundle)
    assert energy.value == 0.0
    assert 0.0 < energy.weight_mass <= 1.0


def test_decay_quantity_needs_aux_field():
    bundle = compute_bundle(plain_field(16), T=1.0, with_aux=False)
    with pytest.raises(ValueError):
        decay_quantity(bundle)


def test_decay_quantity_is_positive_with_holes(lattice_bundle):
    assert decay_quantity(lattice_bundle) > 0.0


def test_mean_value_ratios_of_uniform_gradient():
    grid = Grid(2, 32, 1.0)
    field = plain_field(32)
    rows = mean_value_ratios(np.ones((2,) + grid.shape), field, [0.125, 0.25, 0.5])
    assert [ratio for _, ratio in rows] == pytest.approx([1.0, 1.0, 1.0])


def test_excess_decay_without_holes_is_exact(plain_bundle):
    result = excess_decay_profile(plain_bundle.field, plain_bundle, seed=0)
    assert result.exact_member
    assert result.slope is None


def test_excess_decay_centers_on_the_matrix(lattice_bundle):
    field = lattice_bundle.field
    for seed in range(3):
        result = excess_decay_profile(field, lattice_bundle, seed=seed)
        assert len(result.rows) >= 2
        cell = tuple(np.floor(np.asarray(result.center) / field.grid.spacing).astype(int))
        assert field.matrix_mask[cell]


def test_matrix_point_is_seeded(lattice_field):
    assert np.array_equal(matrix_point(lattice_field, 4), matrix_point(lattice_field, 4))
    points = {tuple(matrix_point(lattice_field, seed)) for seed in range(5)}
    assert len(points) > 1


def test_excess_rows_skip_radii_inside_a_hole():
    bundle = compute_bundle(rasterize(single_ball(0.25, (1.0, 1.0), box_side=2.0), 64), T=1.0, with_sigma=False, with_aux=False)
    grad_u = np.zeros((2, 64, 64))
    rows = nondegenerate_excess_rows(grad_u, bundle, [1.0 / 16.0, 0.125, 0.25, 0.5, 1.0], (1.0, 1.0))
    assert [r for r, _ in rows] == [0.5, 1.0]
    with pytest.raises(SingularGram):
        nondegenerate_excess_rows(grad_u, bundle, [1.0 / 16.0, 0.125], (1.0, 1.0))


def test_excess_slope_floor():
    def result(slope):
        return ExcessDecayResult(rows=(), slope=slope, exact_member=False, slope_floor=0.5)

    assert result(0.4).meets_floor is False
    assert result(0.6).meets_floor is True
    assert result(None).meets_floor is None
    assert ExcessDecayResult(rows=(), slope=0.6, exact_member=False).meets_floor is None


@pytest.mark.slow
def test_mean_value_ratios_are_stable_under_refinement():
    ratios = []
    for n in (64, 128):
        field = rasterize(lattice_set(), n)
        bundle = compute_bundle(field, T=16.0, with_aux=False)
        check = mean_value_check(field, bundle, seed=1, center=(0.5, 0.5))
        ratios.append(dict(check.rows))
    for radius in (0.25, 0.5, 1.0):
        assert ratios[1][radius] == pytest.approx(ratios[0][radius], rel=0.25)


def test_fit_excess_slope_recovers_power():
    rows = [(r, ExcessResult(value=0.1 * r ** 2, xi=(0.0, 0.0), energy=1.0, condition=1.0)) for r in (0.25, 0.5, 1.0)]
    slope, exact = fit_excess_slope(rows)
    assert slope == pytest.approx(2.0)
    assert not exact
    assert fit_excess_slope(rows, rstar=0.75) == (None, False)


def test_locality_probe_on_whole_torus_is_zero(lattice_bundle):
    result = locality_probe(lattice_bundle.field, lattice_bundle, [2.0], seed=1)
    assert result.rows == ((2.0, 0.0),)
    assert result.decay_rate is None


def test_oscillation_probe_with_unchanged_geometry(lattice_bundle):
    assert oscillation_probe(lattice_bundle.field, lattice_bundle, (2.0, 2.0), 0.5, 1.0, seed=3) == 0.0


def test_oscillation_sum_and_shape_fit():
    rows = [((0.0, 0.0), 0.0, 1.0), ((0.5, 0.0), 0.5, 2.0)]
    assert oscillation_sum(rows, 0.5) == pytest.approx(1.25)
    radii = np.array([0.25, 0.5, 1.0])
    shape = ((radii + 0.1) ** 0.5 / radii) ** 2
    constant, residual = oscillation_shape_fit(radii, 3.0 * shape, 0.1, 0.5, 2)
    assert constant == pytest.approx(3.0)
    assert residual == pytest.approx(0.0, abs=1e-20)
