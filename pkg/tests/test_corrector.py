import logging

import numpy as np
import pytest

from conftest import lattice_set, plain_field
from holehom.corrector import (
    CorrectorBundle,
    compute_bundle,
    default_T,
    flux_corrector,
    flux_divergence,
    homogenized_estimate,
    massive_aux_field,
    massive_corrector,
    sigma_component,
    sigma_divergence,
    voigt_bound,
)
from holehom.elliptic import LAPLACE, MASSIVE, SolverConfig, apply_operator, backward_difference, divergence_rhs, solve_spectral
from holehom.field import Grid, rasterize
from holehom.geometry import InclusionSet

TIGHT = SolverConfig(relative_tolerance=1e-12)


@pytest.fixture(scope="module")
def lattice_bundle():
    field = rasterize(lattice_set(), 64)
    return compute_bundle(field, T=16.0, cfg=TIGHT)


def test_null_medium_has_no_corrector():
    field = plain_field(128)
    bundle = compute_bundle(field, T=128.0 ** 2)
    for entry in bundle.directions:
        assert np.max(np.abs(entry.phi.data)) <= 1e-9
    estimate = homogenized_estimate(bundle)
    assert np.allclose(estimate.a_hom, np.eye(2), atol=1e-8)


def test_constant_flux_is_the_direction():
    entry = massive_corrector(plain_field(16), 1.0, 1)
    assert np.all(entry.flux.data[0] == 0.0)
    assert np.all(entry.flux.data[1] == 1.0)


def test_stripes_reproduce_one_dimensional_homogenization(stripes_profile):
    empty = InclusionSet.from_arrays(np.zeros((0, 2)), [], box_side=1.0, dimension=2, separation=1.0)
    field = rasterize(empty, 256, stripes_profile)
    estimate = homogenized_estimate(compute_bundle(field, T=256.0 ** 2, with_sigma=False, with_aux=False))
    assert estimate.a_hom[0, 0] == pytest.approx(1.6, rel=0.01)
    assert estimate.a_hom[1, 1] == pytest.approx(2.5, rel=0.01)
    assert abs(estimate.a_hom[0, 1]) <= 1e-8


def test_flux_vanishes_on_hole_edges(lattice_bundle):
    field = lattice_bundle.field
    for entry in lattice_bundle.directions:
        for axis in range(2):
            assert np.all(entry.flux.data[axis][~field.edge_matrix_mask(axis)] == 0.0)


def test_flux_divergence_restates_the_equation(lattice_bundle):
    field = lattice_bundle.field
    h = field.grid.spacing
    for i, entry in enumerate(lattice_bundle.directions):
        expected = np.where(field.matrix_mask, entry.phi.data / lattice_bundle.T, 0.0)
        scale = np.linalg.norm(divergence_rhs(field, entry.xi)) / h ** 2
        assert np.linalg.norm(flux_divergence(lattice_bundle, i) - expected) <= 1e-9 * scale


def test_voigt_bound_holds_per_direction(lattice_bundle):
    estimate = homogenized_estimate(lattice_bundle)
    bound = voigt_bound(lattice_bundle)
    assert bound == pytest.approx(lattice_bundle.field.matrix_fraction)
    for xi in np.eye(2):
        assert 0.0 < estimate.quadratic_form(xi) <= bound * 1.02


def test_a_hom_is_nearly_symmetric(lattice_bundle):
    estimate = homogenized_estimate(lattice_bundle)
    assert estimate.symmetry_defect <= 1e-6
    assert np.all(np.linalg.eigvalsh(estimate.symmetric_part()) > 0.0)


def test_flux_mean_is_a_hom_column(lattice_bundle):
    estimate = homogenized_estimate(lattice_bundle)
    for i, entry in enumerate(lattice_bundle.directions):
        assert np.allclose(entry.flux.mean(), estimate.a_hom[:, i], rtol=0.0, atol=1e-15)


def test_corrector_is_linear_in_the_direction(lattice_bundle):
    xi = (0.3, -0.7)
    direct = massive_corrector(lattice_bundle.field, lattice_bundle.T, xi, TIGHT)
    combined = lattice_bundle.combination_phi(xi)
    assert np.max(np.abs(direct.phi.data - combined)) <= 1e-6 * np.max(np.abs(combined))


def test_sigma_is_skew_and_zero_mean(lattice_bundle):
    for tensor in lattice_bundle.sigma:
        assert np.allclose(tensor.mean(), 0.0, atol=1e-12)
        assert np.array_equal(sigma_component(tensor, 1, 0), -sigma_component(tensor, 0, 1))
        assert np.all(sigma_component(tensor, 0, 0) == 0.0)


def test_sigma_of_constant_flux_is_zero():
    grid = Grid(2, 16, 1.0)
    q = np.stack([np.full(grid.shape, 0.4), np.full(grid.shape, -1.3)])
    (tensor,) = flux_corrector([q], grid.spacing)
    assert np.all(np.abs(tensor.data) <= 1e-14)


def test_sigma_divergence_recovers_divergence_free_flux():
    grid = Grid(2, 32, 2.0)
    h = grid.spacing
    psi = np.random.default_rng(3).standard_normal(grid.shape)
    q = np.stack([backward_difference(psi, 1, h), -backward_difference(psi, 0, h)]) + np.array([0.5, 0.2])[:, None, None]
    sigma = flux_corrector([q], h)
    bundle = CorrectorBundle(field=plain_field(32, box_side=2.0), T=1.0, directions=(), sigma=sigma)
    fluctuation = q - q.mean(axis=(1, 2), keepdims=True)
    assert np.max(np.abs(sigma_divergence(bundle, 0) - fluctuation)) <= 1e-9 * np.max(np.abs(fluctuation))


def test_aux_field_round_trip(lattice_bundle):
    grid = lattice_bundle.grid
    T = lattice_bundle.T
    for entry in lattice_bundle.directions:
        q = entry.flux_cell.data
        rhs = (q - q.mean(axis=(1, 2), keepdims=True)) / np.sqrt(T)
        for axis in range(2):
            applied = apply_operator(entry.g.data[axis], grid, MASSIVE, T)
            assert np.linalg.norm(applied - rhs[axis]) <= 1e-11 * np.linalg.norm(rhs[axis])


def test_aux_field_of_constant_flux_is_zero():
    grid = Grid(2, 16, 1.0)
    g = massive_aux_field(np.ones((2,) + grid.shape), 4.0, grid)
    assert np.all(np.abs(g.data) <= 1e-15)


def test_aux_field_approaches_laplace_solve_for_large_T():
    grid = Grid(2, 32, 1.0)
    rng = np.random.default_rng(8)
    q = rng.standard_normal((2,) + grid.shape)
    T = 1e8
    g = massive_aux_field(q, T, grid).data * np.sqrt(T)
    fluctuation = q - q.mean(axis=(1, 2), keepdims=True)
    for axis in range(2):
        limit = solve_spectral(fluctuation[axis], LAPLACE, grid=grid).data
        assert np.max(np.abs(g[axis] - limit)) <= 1e-6 * np.max(np.abs(limit))


def test_threaded_directions_match_serial():
    field = rasterize(lattice_set(seed=6), 32)
    serial = compute_bundle(field, T=4.0, cfg=TIGHT)
    threaded = compute_bundle(field, T=4.0, cfg=TIGHT, workers=2)
    for left, right in zip(serial.directions, threaded.directions):
        assert np.array_equal(left.phi.data, right.phi.data)
    assert np.array_equal(serial.sigma_stack(), threaded.sigma_stack())


def test_default_T_is_box_side_squared(lattice_field):
    assert default_T(lattice_field) == 16.0
    assert compute_bundle(plain_field(8, box_side=2.0), with_sigma=False, with_aux=False).T == 4.0


def test_bundle_notes_label_ergodic_proxy(lattice_bundle):
    assert any(note.startswith("ergodic-proxy") for note in lattice_bundle.notes)


def test_symmetry_defect_above_tolerance_warns(lattice_bundle, caplog):
    with caplog.at_level(logging.WARNING, logger="holehom.corrector.compute"):
        estimate = homogenized_estimate(lattice_bundle, symmetry_tolerance=-1.0)
    assert estimate.symmetry_defect >= 0.0
    assert "symmetry defect" in caplog.text
