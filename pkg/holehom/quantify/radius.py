import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from holehom.field import Grid
from holehom.quantify.balls import ball_mask, dyadic_radii, fint, origin
from holehom.quantify.fits import GrowthFit, select_growth_model

logger = logging.getLogger(__name__)

INFINITE_RADIUS = float("inf")


@dataclass(frozen=True)
class ProfileRow:
    radius: float
    value: float
    auxiliary: Optional[float] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Profile radius must be positive, got {self.radius}")
        if not np.isfinite(self.value):
            raise ValueError(f"Profile value must be finite, got {self.value}")


@dataclass(frozen=True)
class RegularityRadius:
    value: float
    threshold_C: float
    rows: Tuple[ProfileRow, ...]

    @property
    def is_finite(self) -> bool:
        return np.isfinite(self.value)


def normalized_oscillation(stack: np.ndarray, grid: Grid, radius: float, center: Optional[Sequence[float]] = None) -> float:
    """D(R) = R^-2 fint_{B_R} |F - fint_{B_R} F|^2 with the Euclidean norm over the stacked components"""
    mask = ball_mask(grid, center, radius)
    values = stack[:, mask]
    centred = values - values.mean(axis=1, keepdims=True)
    return float(np.mean(np.sum(centred ** 2, axis=0)) / radius ** 2)


def regularity_radius(phi_ext: np.ndarray,
                      sigma: np.ndarray,
                      grid: Grid,
                      threshold_C: float = 100.0,
                      radii: Optional[Sequence[float]] = None,
                      center: Optional[Sequence[float]] = None,
                      ) -> RegularityRadius:
    """Smallest listed r with D(R) <= 1/C for every listed R >= r, +inf if none

    Args:
        phi_ext: Extended correctors, shape (d,) + grid shape
        sigma: Stored flux-corrector components, shape (m,) + grid shape
        grid: Common grid
        threshold_C: The constant C
        radii: Ascending radii, dyadic multiples of h up to L/2 by default
        center: Ball center, the origin by default
    """
    if not threshold_C > 0:
        raise ValueError(f"threshold_C must be positive, got {threshold_C}")
    radii = sorted(dyadic_radii(grid) if radii is None else radii)
    if not radii:
        raise ValueError("regularity_radius needs at least one radius")
    stack = np.concatenate([np.asarray(phi_ext).reshape((-1,) + grid.shape), np.asarray(sigma).reshape((-1,) + grid.shape)])
    rows = tuple(ProfileRow(r, normalized_oscillation(stack, grid, r, center)) for r in radii)

    limit = 1.0 / threshold_C
    value = INFINITE_RADIUS
    for row in reversed(rows):
        if row.value > limit:
            break
        value = row.radius
    return RegularityRadius(value=value, threshold_C=float(threshold_C), rows=rows)


def growth_directions(dimension: int) -> np.ndarray:
    """Unit vectors +-e_k and the diagonals"""
    axes = np.eye(dimension)
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * dimension), indexing="ij")).reshape(dimension, -1).T
    diagonals = signs / np.sqrt(dimension)
    return np.concatenate([axes, -axes, diagonals])


def corrector_growth_profile(phi_ext: np.ndarray,
                             grid: Grid,
                             center: Optional[Sequence[float]] = None,
                             offsets: Optional[Sequence[float]] = None,
                             directions: Optional[np.ndarray] = None,
                             ) -> Tuple[List[ProfileRow], GrowthFit]:
    """Rows (|x|, sqrt of the shell average of fint_{B_1(x)} |phi|^2) and the fitted growth regime"""
    center = origin(grid) if center is None else np.asarray(center, dtype=float)
    offsets = dyadic_radii(grid, smallest=grid.spacing) if offsets is None else offsets
    directions = growth_directions(grid.dimension) if directions is None else np.asarray(directions, dtype=float)
    unit_radius = max(1.0, grid.spacing)
    squared = np.asarray(phi_ext, dtype=float) ** 2
    rows = []
    for offset in offsets:
        averages = [float(fint(squared, ball_mask(grid, center + offset * direction, unit_radius))) for direction in directions]
        rows.append(ProfileRow(float(offset), float(np.sqrt(np.mean(averages)))))
    fit = select_growth_model([row.radius for row in rows], [row.value for row in rows])
    logger.debug(f"Corrector growth regime: {fit.model}")
    return rows, fit
