import logging
from typing import Dict, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from holehom.errors import AdmissibilityError
from holehom.field import CoefficientField, GridField, MaskKind, matrix_components
from holehom.elliptic.spectral import forward_gradient

logger = logging.getLogger(__name__)


def harmonic_extension(u: Union[GridField, np.ndarray], field: CoefficientField) -> GridField:
    """Extend a matrix function into the holes by discrete harmonic interpolation

    Each hole cell satisfies the unweighted 2d-point Laplace equation, with the
    adjacent matrix cells as Dirichlet data. Matrix values pass through unchanged.
    """
    grid = field.grid
    values = u.data if isinstance(u, GridField) else np.asarray(u, dtype=float)
    holes = ~field.matrix_mask
    result = np.where(field.matrix_mask, values, 0.0)
    if not holes.any():
        return GridField.scalar(grid, result, MaskKind.EVERYWHERE)

    count, _, labels = matrix_components(holes)
    touching = np.zeros(count + 1, dtype=bool)
    for axis in range(grid.dimension):
        for shift in (1, -1):
            neighbour_is_matrix = np.roll(field.matrix_mask, shift, axis=axis)
            touching[np.unique(labels[holes & neighbour_is_matrix])] = True
    if not touching[1:].all():
        raise AdmissibilityError("A hole component has no matrix neighbour; the extension is undefined")

    flat_holes = holes.ravel()
    cells = np.flatnonzero(flat_holes)
    position = np.full(grid.size, -1, dtype=np.int64)
    position[cells] = np.arange(len(cells))
    index = np.arange(grid.size).reshape(grid.shape)
    flat_values = result.ravel()

    rows, cols = [], []
    rhs = np.zeros(len(cells))
    for axis in range(grid.dimension):
        for shift in (1, -1):
            neighbour = np.roll(index, shift, axis=axis).ravel()[cells]
            inside = flat_holes[neighbour]
            rows.append(np.arange(len(cells))[inside])
            cols.append(position[neighbour[inside]])
            rhs += np.where(inside, 0.0, flat_values[neighbour])
    m = len(cells)
    off = np.concatenate(rows)
    matrix = coo_matrix(
        (
            np.concatenate([np.full(m, 2.0 * grid.dimension), -np.ones(len(off))]),
            (np.concatenate([np.arange(m), off]), np.concatenate([np.arange(m), np.concatenate(cols)])),
        ),
        shape=(m, m),
    ).tocsc()
    flat_values = flat_values.copy()
    flat_values[cells] = np.atleast_1d(spsolve(matrix, rhs))
    return GridField.scalar(grid, flat_values.reshape(grid.shape), MaskKind.EVERYWHERE)


def extension_bounds(field: CoefficientField, samples: int = 100, seed: int = 0) -> Dict[str, float]:
    """Largest observed ||u^ext||/||u|| and ||grad u^ext||/||grad u|| over random matrix functions

    Matrix norms count matrix cells and matrix-matrix edges only; extension
    norms count every cell and edge.
    """
    grid = field.grid
    h = grid.spacing
    rng = np.random.default_rng(seed)
    edge_masks = np.stack([field.edge_matrix_mask(axis) for axis in range(grid.dimension)])
    value_ratio, gradient_ratio = 0.0, 0.0
    for _ in range(samples):
        u = np.where(field.matrix_mask, rng.standard_normal(grid.shape), 0.0)
        extended = harmonic_extension(u, field).data
        value_ratio = max(value_ratio, float(np.linalg.norm(extended) / np.linalg.norm(u)))
        gradient_matrix = np.linalg.norm(forward_gradient(u, h)[edge_masks])
        if gradient_matrix > 0:
            gradient_ratio = max(gradient_ratio, float(np.linalg.norm(forward_gradient(extended, h)) / gradient_matrix))
    logger.info(f"Extension bounds at n={grid.cells_per_side}: value {value_ratio:.4g}, gradient {gradient_ratio:.4g}")
    return {"value_norm": value_ratio, "gradient_norm": gradient_ratio, "samples": samples}
