from collections import deque

import numpy as np
import pytest

from conftest import lattice_set, plain_field, single_ball
from holehom.field import CoefficientProfile, Grid, GridField, MaskKind, matrix_components, rasterize
from holehom.geometry import InclusionSet


def flood_fill_count(mask: np.ndarray) -> int:
    """Periodic face-adjacency components by breadth-first search"""
    seen = np.zeros(mask.shape, dtype=bool)
    count = 0
    n = mask.shape
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            cell = queue.popleft()
            for axis in range(mask.ndim):
                for step in (-1, 1):
                    neighbour = list(cell)
                    neighbour[axis] = (neighbour[axis] + step) % n[axis]
                    neighbour = tuple(neighbour)
                    if mask[neighbour] and not seen[neighbour]:
                        seen[neighbour] = True
                        queue.append(neighbour)
    return count


def test_grid_rejects_bad_resolution():
    with pytest.raises(ValueError):
        Grid(2, 48, 1.0)
    with pytest.raises(ValueError):
        Grid(2, 2, 1.0)


def test_empty_set_is_all_matrix():
    empty = InclusionSet.from_arrays(np.zeros((0, 2)), [], box_side=1.0, dimension=2, separation=1.0)
    field = rasterize(empty, 16)
    assert field.matrix_mask.all()
    for conductance in field.edge_conductance:
        assert np.all(conductance == 1.0)


def test_disk_area_converges():
    target = np.pi / 16.0
    for n in (64, 128, 256, 512):
        field = rasterize(single_ball(0.25), n)
        assert abs(field.hole_fraction - target) <= 2.0 / n


def test_conductance_vanishes_exactly_on_hole_edges():
    field = rasterize(lattice_set(), 16)
    mask = field.matrix_mask
    n = field.grid.cells_per_side
    for axis in range(2):
        conductance = field.edge_conductance[axis]
        for index in np.ndindex(mask.shape):
            neighbour = list(index)
            neighbour[axis] = (neighbour[axis] + 1) % n
            touches_hole = not (mask[index] and mask[tuple(neighbour)])
            assert (conductance[index] == 0.0) == touches_hole


def test_mask_value_coherence_and_ellipticity():
    profile = CoefficientProfile(kind="iid_uniform", a_minus=0.5, a_plus=2.0, seed=4)
    field = rasterize(lattice_set(), 64, profile)
    assert np.array_equal(field.cell_value > 0, field.matrix_mask)
    for axis, conductance in enumerate(field.edge_conductance):
        both = field.edge_matrix_mask(axis)
        assert conductance[both].min() >= 0.5
        assert conductance[both].max() <= 2.0


def test_stripes_profile(stripes_profile):
    field = rasterize(InclusionSet.from_arrays(np.zeros((0, 2)), [], box_side=1.0, dimension=2, separation=1.0), 256, stripes_profile)
    assert set(np.unique(field.cell_value)) == {1.0, 4.0}
    assert np.all(field.cell_value[:64] == 1.0)
    assert np.all(field.cell_value[64:128] == 4.0)


def test_coarse_resolution_warns():
    tiny = single_ball(radius=0.01, center=(0.0, 0.0))
    field = rasterize(tiny, 4)
    assert field.matrix_mask.all()
    assert len(field.warnings) == 1


def test_no_holes_single_component():
    count, largest, _ = matrix_components(plain_field(16))
    assert count == 1
    assert largest == 16 * 16


def test_slab_wraps_around_the_torus():
    mask = np.ones((16, 16), dtype=bool)
    mask[:, 4] = False
    count, largest, _ = matrix_components(mask)
    assert count == 1
    assert largest == 16 * 15

    mask[:, 12] = False
    count, _, _ = matrix_components(mask)
    assert count == 2


def test_components_match_flood_fill():
    rng = np.random.default_rng(0)
    for _ in range(5):
        mask = rng.random((32, 32)) > 0.45
        count, _, labels = matrix_components(mask)
        assert count == flood_fill_count(mask)
        assert np.array_equal(labels > 0, mask)


def test_tile_rescales_onto_unit_torus():
    field = rasterize(lattice_set(), 16)
    tiled = field.tile(4)
    assert tiled.grid.box_side == 1.0
    assert tiled.grid.cells_per_side == 64
    assert tiled.tile_count == 4
    assert np.array_equal(tiled.matrix_mask[:16, :16], field.matrix_mask)
    assert tiled.matrix_fraction == pytest.approx(field.matrix_fraction)


def test_grid_field_is_read_only():
    grid = Grid(2, 8, 1.0)
    field = GridField.scalar(grid, np.ones(grid.shape))
    with pytest.raises(ValueError):
        field.data[0, 0] = 2.0
    with pytest.raises(ValueError):
        GridField.scalar(grid, np.full(grid.shape, np.nan))


def test_restricted_zeroes_holes():
    field = rasterize(single_ball(), 32)
    data = GridField.scalar(field.grid, np.ones(field.grid.shape)).restricted(field.matrix_mask)
    assert data.mask is MaskKind.MATRIX_ONLY
    assert np.all(data.data[~field.matrix_mask] == 0.0)
