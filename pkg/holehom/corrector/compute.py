import logging
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from holehom.corrector.bundle import CorrectorBundle, DirectionalCorrector, HomogenizedEstimate
from holehom.elliptic import (
    LAPLACE,
    MASSIVE,
    MassiveOperator,
    SolverConfig,
    backward_difference,
    divergence_rhs,
    edge_flux,
    forward_difference,
    harmonic_extension,
    solve_spectral,
)
from holehom.field import CoefficientField, Grid, GridField

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-6


def default_T(field: CoefficientField) -> float:
    return field.grid.box_side ** 2


def _unit(dimension: int, direction) -> np.ndarray:
    if isinstance(direction, (int, np.integer)):
        xi = np.zeros(dimension)
        xi[direction] = 1.0
        return xi
    xi = np.asarray(direction, dtype=float)
    if xi.shape != (dimension,):
        raise ValueError(f"Direction must have {dimension} components, got {xi.shape}")
    return xi


def cell_average(flux: np.ndarray) -> np.ndarray:
    """Average each edge component over the two edges bounding the cell along its axis"""
    return np.stack([0.5 * (flux[axis] + np.roll(flux[axis], 1, axis=axis)) for axis in range(flux.shape[0])])


def massive_corrector(field: CoefficientField,
                      T: float,
                      direction,
                      cfg: Optional[SolverConfig] = None,
                      operator: Optional[MassiveOperator] = None,
                      ) -> DirectionalCorrector:
    """Solve (1/T) chi phi - div a(grad phi + xi) = 0 on the matrix and extend into the holes

    Args:
        field: Coefficient field
        T: Massive time scale
        direction: Axis index or a direction vector xi
        cfg: Solver configuration
        operator: Prebuilt operator for this (field, T), shared across directions

    Raises:
        NonConvergence: propagated from the CG solve
    """
    grid = field.grid
    xi = _unit(grid.dimension, direction)
    operator = operator or MassiveOperator(field, T)
    phi, stats = operator.solve(divergence_rhs(field, xi), cfg)
    phi_ext = harmonic_extension(phi, field)
    q = edge_flux(field, phi.data, xi)
    return DirectionalCorrector(
        xi=tuple(float(x) for x in xi),
        phi=phi,
        phi_ext=phi_ext,
        flux=GridField.vector(grid, q),
        flux_cell=GridField.vector(grid, cell_average(q)),
        stats=stats,
    )


def flux(entry: DirectionalCorrector) -> GridField:
    """Edge flux q = a (grad phi + xi) of a directional corrector"""
    return entry.flux


def flux_corrector(cell_fluxes: Sequence[np.ndarray], h: float) -> Tuple[GridField, ...]:
    """Solve -Lap sigma_ijk = D+_j (q_i)_k - D+_k (q_i)_j for every direction i and j < k

    Args:
        cell_fluxes: Cell-centered flux q_i per direction, each shaped (d,) + grid
        h: Grid spacing

    Returns:
        One tensor field per direction, components (j, k) with j < k, zero mean
    """
    tensors = []
    for q in cell_fluxes:
        q = np.asarray(q, dtype=float)
        d = q.shape[0]
        grid = Grid(d, q.shape[1], h * q.shape[1])
        pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
        sources = np.stack([
            forward_difference(q[k], j, h) - forward_difference(q[j], k, h) for j, k in pairs
        ])
        solved = solve_spectral(GridField.tensor(grid, sources, pairs), LAPLACE)
        tensors.append(solved)
    return tuple(tensors)


def sigma_component(tensor: GridField, j: int, k: int) -> np.ndarray:
    """sigma_jk with the skew rule sigma_kj = -sigma_jk and sigma_jj = 0"""
    if j == k:
        return np.zeros(tensor.grid.shape)
    if j < k:
        return tensor.component((j, k))
    return -tensor.component((k, j))


def sigma_divergence(bundle: CorrectorBundle, direction: int) -> np.ndarray:
    """sum_k D-_k sigma_ijk for direction i, shape (d,) + grid shape"""
    tensor = bundle.sigma[direction]
    grid = tensor.grid
    return np.stack([
        sum(backward_difference(sigma_component(tensor, j, k), k, grid.spacing) for k in range(grid.dimension))
        for j in range(grid.dimension)
    ])


def massive_aux_field(cell_flux: np.ndarray, T: float, grid) -> GridField:
    """g_T from (1/T - Lap) g = (q - <q>) / sqrt T, the torus mean standing in for E[q]"""
    cell_flux = np.asarray(cell_flux, dtype=float)
    fluctuation = cell_flux - cell_flux.mean(axis=tuple(range(1, cell_flux.ndim)), keepdims=True)
    return solve_spectral(GridField.vector(grid, fluctuation / np.sqrt(T)), MASSIVE, T=T)


def compute_bundle(field: CoefficientField,
                   T: Optional[float] = None,
                   cfg: Optional[SolverConfig] = None,
                   workers: int = 1,
                   with_sigma: bool = True,
                   with_aux: bool = True,
                   ) -> CorrectorBundle:
    """Correctors for all d unit directions, plus sigma and g_T

    The directional solves share one operator and run on a thread pool.
    """
    T = default_T(field) if T is None else float(T)
    grid = field.grid
    operator = MassiveOperator(field, T)
    directions = range(grid.dimension)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, grid.dimension)) as pool:
            entries: List[DirectionalCorrector] = list(
                pool.map(lambda i: massive_corrector(field, T, i, cfg, operator), directions)
            )
    else:
        entries = [massive_corrector(field, T, i, cfg, operator) for i in directions]

    notes = ["ergodic-proxy: expectations replaced by torus averages"]
    if with_aux:
        logger.info("g_T uses the torus mean of q_T as ergodic proxy for E[q_T]")
        entries = [
            replace(entry, g=massive_aux_field(entry.flux_cell.data, T, grid))
            for entry in entries
        ]
    sigma: Tuple[GridField, ...] = ()
    if with_sigma:
        sigma = flux_corrector([entry.flux_cell.data for entry in entries], grid.spacing)
        logger.info("sigma_T solves the non-massive Poisson equation driven by the massive flux q_T")
        notes.append("sigma: non-massive Poisson equation applied to the massive flux q_T")

    for entry in entries:
        logger.debug(f"Direction {entry.xi}: {entry.stats.iterations} iterations, residual {entry.stats.residual:.3e}")
    return CorrectorBundle(field=field, T=T, directions=tuple(entries), sigma=sigma, notes=tuple(notes))


def homogenized_estimate(bundle: CorrectorBundle, seed: int = 0, symmetry_tolerance: float = SYMMETRY_TOLERANCE) -> HomogenizedEstimate:
    """(a_hom)_ji = torus mean of the j-component of q_i"""
    d = bundle.dimension
    a_hom = np.zeros((d, d))
    for i, entry in enumerate(bundle.directions):
        a_hom[:, i] = entry.flux.mean()
    estimate = HomogenizedEstimate(
        a_hom=a_hom,
        volume_fraction_matrix=bundle.field.matrix_fraction,
        residuals=tuple(entry.stats.residual for entry in bundle.directions),
        n=bundle.grid.cells_per_side,
        T=bundle.T,
        seed=seed,
    )
    defect = estimate.symmetry_defect
    if defect > symmetry_tolerance:
        logger.warning(f"a_hom symmetry defect {defect:.3e} above {symmetry_tolerance:.0e}")
    else:
        logger.debug(f"a_hom symmetry defect {defect:.3e}")
    return estimate


def flux_divergence(bundle: CorrectorBundle, direction: int) -> np.ndarray:
    """Backward-difference divergence of the edge flux q_i, equal to chi phi_i / T"""
    entry = bundle.directions[direction]
    h = bundle.grid.spacing
    return sum(backward_difference(entry.flux.data[axis], axis, h) for axis in range(bundle.dimension))


def voigt_bound(bundle: CorrectorBundle) -> float:
    return bundle.field.matrix_fraction * bundle.field.a_plus
