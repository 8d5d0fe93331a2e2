import logging
from math import factorial, pi
from typing import List, Optional, Sequence, Tuple

import numpy as np

from holehom.field import CoefficientField, Grid

logger = logging.getLogger(__name__)

CENTER_STREAM = 0x43


def origin(grid: Grid) -> np.ndarray:
    return np.zeros(grid.dimension)


def ball_mask(grid: Grid, center: Optional[Sequence[float]], radius: float) -> np.ndarray:
    """Cells whose centers lie in the open periodic ball; the nearest cell if none does"""
    center = origin(grid) if center is None else np.asarray(center, dtype=float)
    distance = grid.distance_from(center)
    mask = distance < radius
    if not mask.any():
        mask = distance == distance.min()
    return mask


def matrix_point(field: CoefficientField, seed: int) -> np.ndarray:
    """Center of a random matrix cell whose edges in every axis are matrix edges

    Falls back to any matrix cell when no cell has all its edges in the matrix.
    """
    interior = field.matrix_mask.copy()
    for axis in range(field.grid.dimension):
        interior &= field.edge_matrix_mask(axis)
    candidates = np.argwhere(interior if interior.any() else field.matrix_mask)
    if len(candidates) == 0:
        raise ValueError("The field has no matrix cells")
    cell = candidates[np.random.default_rng((seed, CENTER_STREAM)).integers(len(candidates))]
    return (cell + 0.5) * field.grid.spacing


def ball_displacement(grid: Grid, center: Optional[Sequence[float]]) -> np.ndarray:
    """Unwrapped local coordinates x - center, valid inside balls of radius <= L/2"""
    center = origin(grid) if center is None else np.asarray(center, dtype=float)
    return grid.displacement_from(center)


def dyadic_radii(grid: Grid, smallest: Optional[float] = None, largest: Optional[float] = None) -> List[float]:
    """Radii 2^k h from 2h (or smallest) up to L/2 (or largest)"""
    h = grid.spacing
    smallest = 2.0 * h if smallest is None else smallest
    largest = 0.5 * grid.box_side if largest is None else largest
    radii = []
    radius = h
    while radius <= largest * (1.0 + 1e-12):
        if radius >= smallest * (1.0 - 1e-12):
            radii.append(radius)
        radius *= 2.0
    return radii


def edge_chi(field: CoefficientField) -> np.ndarray:
    """Matrix indicator of each edge x -> x + e_k, stored at its left cell x"""
    return np.stack([field.edge_matrix_mask(axis) for axis in range(field.grid.dimension)]).astype(float)


def fint(values: np.ndarray, mask: np.ndarray):
    """Average over the cells of mask, per leading component"""
    count = int(mask.sum())
    if count == 0:
        raise ValueError("Cannot average over an empty cell set")
    return np.asarray(values)[..., mask].sum(axis=-1) / count


def quartic_cutoff(grid: Grid, center: Optional[Sequence[float]], radius: float) -> np.ndarray:
    """1 on B_{R/2}, 0 outside B_R, (1 - s^2)^2 in between with s = (|x| - R/2) / (R/2)"""
    center = origin(grid) if center is None else center
    distance = grid.distance_from(center)
    half = 0.5 * radius
    s = np.clip((distance - half) / half, 0.0, 1.0)
    return (1.0 - s ** 2) ** 2


def quartic_bump(grid: Grid, center: Optional[Sequence[float]], radius: float) -> np.ndarray:
    """Radial bump (1 - |x|^2/r^2)^2 on B_r, scaled so its discrete L2 norm is r^(-d/2)"""
    center = origin(grid) if center is None else center
    distance = grid.distance_from(center)
    bump = np.where(distance < radius, (1.0 - (distance / radius) ** 2) ** 2, 0.0)
    if not bump.any():
        bump = (distance == distance.min()).astype(float)
    norm = np.sqrt(grid.cell_volume * np.sum(bump ** 2))
    return bump * radius ** (-0.5 * grid.dimension) / norm


def unit_sphere_area(dimension: int) -> float:
    return {2: 2.0 * pi, 3: 4.0 * pi}[dimension]


def exponential_weight(grid: Grid, T: float, kappa: float = 1.0, center: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, float]:
    """omega_T = exp(-|x| / (kappa sqrt T)) / (|dB_1| (d-1)! (kappa sqrt T)^d) on the torus

    The weight is cut at the half-width L/2 and renormalised to unit discrete
    mass. Returns the renormalised weight and the mass before renormalisation.
    """
    if not T > 0 or not kappa > 0:
        raise ValueError(f"T and kappa must be positive, got T={T}, kappa={kappa}")
    center = origin(grid) if center is None else center
    width = kappa * np.sqrt(T)
    distance = grid.distance_from(center)
    d = grid.dimension
    weight = np.exp(-distance / width) / (unit_sphere_area(d) * factorial(d - 1) * width ** d)
    weight = np.where(distance <= 0.5 * grid.box_side, weight, 0.0)
    mass = float(grid.cell_volume * weight.sum())
    logger.info(f"Exponential weight truncated at L/2 with mass {mass:.6f}, renormalised to 1")
    return weight / mass, mass
