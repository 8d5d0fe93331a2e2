import numpy as np
import pytest

from conftest import plain_field
from holehom.corrector import compute_bundle
from holehom.elliptic import LAPLACE, MASSIVE, SolverConfig, apply_operator, solve_spectral
from holehom.errors import ConfigError, ScaleMismatch
from holehom.field import GridField, MaskKind, rasterize
from holehom.geometry import LatticeIIDSampler, RadiusLaw
from holehom.io import load_config
from holehom.twoscale import (
    DefectRow,
    TrigForcing,
    cell_bundle as sample_cell_bundle,
    cell_resolution,
    epsilon_field,
    rate_fit,
    run_twoscale,
    solve_eps_problem,
    solve_homogenized,
    two_scale_defect,
)

TIGHT = SolverConfig(relative_tolerance=1e-12)


@pytest.fixture(scope="module")
def cell_bundle():
    """Four holes of radius 0.2 on a cell of side 2, h = 1/16"""
    field = rasterize(LatticeIIDSampler(2, 2, RadiusLaw("point", value=0.2)).sample(3), 32)
    return compute_bundle(field, T=16.0, cfg=TIGHT, with_sigma=False, with_aux=False)


def twoscale_config(**twoscale):
    document = {
        "geometry": {"box_side": 4, "seed": 3, "radius_law": {"kind": "point", "value": 0.2}},
        "twoscale": {"epsilon_list": [0.5, 0.25, 0.125], "cell_side": 2, "cells_per_unit": 8, "bootstrap_resamples": 200},
    }
    document["twoscale"].update(twoscale)
    return load_config(document)


def defect_rows(defect, realizations=2):
    return [
        DefectRow(realization=r, epsilon=eps, defect=defect(eps) * (1.0 + 0.01 * r), grad_g_norm=1.0, cells_per_side=64, matrix_fraction=0.9, seed=r)
        for r in range(realizations)
        for eps in (0.5, 0.25, 0.125, 0.0625)
    ]


def test_zero_forcing_has_zero_defect():
    report = run_twoscale(twoscale_config(forcing="zero"))
    assert len(report.rows) == 3
    assert all(row.defect == 0.0 for row in report.rows)
    assert report.fit is None


def test_eps_problem_without_holes_matches_spectral_solve():
    field = plain_field(64)
    forcing = TrigForcing(1.0)
    T = 100.0
    u = solve_eps_problem(field, forcing, T, TIGHT).data
    g = forcing.edge_values(field.grid)
    h = field.grid.spacing
    divergence = sum(g[k] - np.roll(g[k], 1, axis=k) for k in range(2)) / h
    expected = solve_spectral(divergence, MASSIVE, T, grid=field.grid).data
    assert np.max(np.abs(u - expected)) <= 1e-8 * np.max(np.abs(expected))


def test_homogenized_solve_inverts_laplacian():
    field = plain_field(32)
    forcing = TrigForcing(2.0)
    u = solve_homogenized(forcing, np.eye(2), field.grid)
    g = forcing.edge_values(field.grid)
    divergence = sum(g[k] - np.roll(g[k], 1, axis=k) for k in range(2)) / field.grid.spacing
    assert np.allclose(apply_operator(u, field.grid, LAPLACE), divergence, atol=1e-9)
    assert abs(u.mean()) <= 1e-12


def test_defect_ignores_constant_shift(cell_bundle):
    field = epsilon_field(cell_bundle.field, 0.25)
    forcing = TrigForcing(1.0)
    u_eps = solve_eps_problem(field, forcing, 10.0)
    u_hom = solve_homogenized(forcing, np.eye(2) * 0.8, field.grid)
    shifted = GridField.scalar(field.grid, np.where(field.matrix_mask, u_eps.data + 5.0, 0.0), MaskKind.MATRIX_ONLY)
    base = two_scale_defect(u_eps, u_hom, cell_bundle, 0.25, field)
    assert base > 0.0
    assert two_scale_defect(shifted, u_hom, cell_bundle, 0.25, field) == pytest.approx(base, rel=1e-9)


def test_mismatched_scale_raises(cell_bundle):
    field = epsilon_field(cell_bundle.field, 0.25)
    u = GridField.scalar(field.grid, np.zeros(field.grid.shape))
    with pytest.raises(ScaleMismatch):
        two_scale_defect(u, np.zeros(field.grid.shape), cell_bundle, 0.5, field)


def test_epsilon_must_divide_the_torus(cell_bundle):
    with pytest.raises(ValueError):
        epsilon_field(cell_bundle.field, 0.3)


def test_trig_forcing_gradient_norm():
    field = plain_field(64)
    assert TrigForcing(0.0).gradient_norm(field.grid) == 0.0
    assert TrigForcing(2.0).gradient_norm(field.grid) == pytest.approx(2.0 * TrigForcing(1.0).gradient_norm(field.grid))


def test_rate_fit_recovers_linear_rate():
    fit = rate_fit(defect_rows(lambda eps: 3.0 * eps), resamples=200)
    assert fit.rate == pytest.approx(1.0)
    assert fit.model == "power"
    assert fit.monotone_median
    assert len(fit.per_realization) == 2


def test_rate_fit_prefers_log_corrected_model():
    fit = rate_fit(defect_rows(lambda eps: eps * np.log(2.0 + 1.0 / eps)), resamples=200)
    assert fit.model == "log_corrected"
    assert fit.log_corrected_residual < fit.power_residual


def test_rate_fit_needs_three_epsilons():
    rows = [row for row in defect_rows(lambda eps: eps) if row.epsilon in (0.5, 0.25)]
    with pytest.raises(ValueError):
        rate_fit(rows)


@pytest.mark.slow
def test_twoscale_run_fits_a_rate():
    report = run_twoscale(twoscale_config())
    assert [row.epsilon for row in report.rows] == [0.5, 0.25, 0.125]
    assert [row.cells_per_side for row in report.rows] == [32, 64, 128]
    assert all(row.matrix_fraction < 1.0 for row in report.rows)
    assert all(row.defect > 0 for row in report.rows)
    assert report.fit is not None


def test_cell_bundle_resolves_the_holes():
    cfg = twoscale_config(cells_per_unit=16)
    assert cell_resolution(cfg) == (2, 32)
    bundle = sample_cell_bundle(cfg, 7)
    assert bundle.grid.box_side == 2.0
    assert bundle.grid.cells_per_side == 32
    assert 0.0 < bundle.field.matrix_fraction < 1.0


def test_fixture_cell_is_perforated(cell_bundle):
    assert cell_bundle.field.matrix_fraction < 1.0
    assert epsilon_field(cell_bundle.field, 0.25).matrix_fraction == pytest.approx(cell_bundle.field.matrix_fraction)


def test_cell_resolution_must_be_a_power_of_two():
    with pytest.raises(ConfigError):
        cell_resolution(twoscale_config(cells_per_unit=6))
    with pytest.raises(ConfigError):
        cell_resolution(twoscale_config(cell_side=1, cells_per_unit=4))


def test_unresolved_cell_is_rejected():
    cfg = load_config({
        "geometry": {"box_side": 4, "radius_law": {"kind": "point", "value": 0.05}},
        "twoscale": {"cell_side": 2, "cells_per_unit": 4},
    })
    with pytest.raises(ConfigError):
        sample_cell_bundle(cfg, 1)
