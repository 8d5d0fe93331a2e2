import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from holehom.corrector import CorrectorBundle
from holehom.elliptic import forward_gradient, harmonic_extension
from holehom.field import CoefficientField, GridField
from holehom.quantify.balls import ball_displacement, ball_mask, edge_chi, exponential_weight, quartic_cutoff
from holehom.quantify.fits import growth_regime, implied_moment_exponent, slope_through_origin

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HoleFillingResult:
    rows: Tuple[Tuple[float, float], ...]
    eps_hat: float
    regime: str
    growth_exponent: float
    implied_gamma: float
    outer_radius: float


def energy_density(bundle: CorrectorBundle, direction: int) -> np.ndarray:
    """chi_M ((1/T) phi^2 + |grad phi + e|^2 + 1) per cell, gradients on matrix edges"""
    entry = bundle.directions[direction]
    chi = edge_chi(bundle.field)
    gradient = entry.corrected_gradient() * chi
    density = entry.phi.data ** 2 / bundle.T + np.sum(gradient ** 2, axis=0) + 1.0
    return np.where(bundle.field.matrix_mask, density, 0.0)


def hole_filling_ratio(bundle: CorrectorBundle,
                       direction: int = 0,
                       center: Optional[Sequence[float]] = None,
                       beta: float = float("inf"),
                       ) -> HoleFillingResult:
    """E(R) on radii sqrt(T)/2^k >= 2h and the fitted hole-filling exponent

    The regressor is the log of the discrete ball volume ratio, d log(R/sqrt T)
    in the continuum, and the fit passes through the origin.
    Radii whose balls hold no matrix cell have zero energy and stay out of
    the fit; their rows are still reported.

    Raises:
        ValueError: fewer than two radii, the outer one included, meet the matrix
    """
    grid = bundle.grid
    outer = float(np.sqrt(bundle.T))
    if outer > 0.5 * grid.box_side:
        logger.info(f"sqrt(T) = {outer:.4g} exceeds L/2; hole filling uses R <= {0.5 * grid.box_side:.4g}")
        outer = 0.5 * grid.box_side
    density = energy_density(bundle, direction) * grid.cell_volume

    radii = []
    radius = outer
    while radius >= 2.0 * grid.spacing * (1.0 - 1e-12):
        radii.append(radius)
        radius /= 2.0
    radii = sorted(radii)
    if len(radii) < 2:
        raise ValueError(f"sqrt(T) = {outer:.4g} leaves fewer than two radii above 2h")

    masks = [ball_mask(grid, center, r) for r in radii]
    energies = [float(density[mask].sum()) for mask in masks]
    fitted = [k for k, energy in enumerate(energies) if energy > 0.0]
    if len(fitted) < 2 or fitted[-1] != len(radii) - 1:
        raise ValueError(f"Hole filling needs two radii whose balls meet the matrix, got {len(fitted)}")
    if len(fitted) < len(radii):
        logger.info(f"Hole filling skips {len(radii) - len(fitted)} radii whose balls lie inside holes")
    outer_energy, outer_count = energies[-1], masks[-1].sum()
    x = [np.log(masks[k].sum() / outer_count) for k in fitted[:-1]]
    y = [np.log(energies[k] / outer_energy) for k in fitted[:-1]]
    eps_hat = slope_through_origin(x, y)
    regime, exponent = growth_regime(eps_hat, grid.dimension)
    return HoleFillingResult(
        rows=tuple(zip(radii, energies)),
        eps_hat=eps_hat,
        regime=regime,
        growth_exponent=exponent,
        implied_gamma=implied_moment_exponent(eps_hat, grid.dimension, beta),
        outer_radius=outer,
    )


def caccioppoli_check(bundle: CorrectorBundle,
                      direction: int,
                      R: float,
                      rho: float,
                      center: Optional[Sequence[float]] = None,
                      ) -> float:
    """(int_{B_{R-rho}} chi |grad(x_i + phi)|^2) / (rho^-2 inf_c int_{B_R} chi |x_i + phi - c|^2)"""
    grid = bundle.grid
    if not grid.spacing < rho < R <= 0.5 * grid.box_side:
        raise ValueError(f"Caccioppoli check needs h < rho < R <= L/2, got rho={rho}, R={R}")
    entry = bundle.directions[direction]
    field = bundle.field
    gradient = entry.corrected_gradient() * edge_chi(field)
    inner = ball_mask(grid, center, R - rho) & field.matrix_mask
    numerator = grid.cell_volume * float(np.sum(np.sum(gradient ** 2, axis=0)[inner]))

    outer = ball_mask(grid, center, R) & field.matrix_mask
    u = ball_displacement(grid, center)[direction] + entry.phi.data
    values = u[outer]
    denominator = grid.cell_volume * float(np.sum((values - values.mean()) ** 2)) / rho ** 2
    return numerator / denominator


def weighted_mean(u: Union[GridField, np.ndarray],
                  field: CoefficientField,
                  R: float,
                  center: Optional[Sequence[float]] = None,
                  ) -> Tuple[float, float]:
    """F = (int eta^2 chi u) / (int eta^2 chi) and the Poincare-type ratio against u^ext

    Returns:
        (F, ratio) with ratio = int_{B_R} chi |u - F|^2 / inf_c int_{B_R} |u^ext - c|^2,
        and 0 for a constant u
    """
    grid = field.grid
    if R > 0.5 * grid.box_side:
        raise ValueError(f"Weighted mean radius {R} exceeds L/2")
    values = u.data if isinstance(u, GridField) else np.asarray(u, dtype=float)
    weights = quartic_cutoff(grid, center, R) ** 2 * field.matrix_mask
    total = float(weights.sum())
    F = float(np.sum(weights * values) / total) if total > 0 else 0.0

    ball = ball_mask(grid, center, R)
    numerator = float(np.sum(((values - F) ** 2)[ball & field.matrix_mask]))
    extended = harmonic_extension(np.where(field.matrix_mask, values, 0.0), field).data[ball]
    denominator = float(np.sum((extended - extended.mean()) ** 2))
    if denominator == 0.0:
        return F, 0.0
    return F, numerator / denominator


@dataclass(frozen=True)
class WeightedEnergy:
    value: float
    weight_mass: float


def weighted_energy(bundle: CorrectorBundle,
                    kappa: float = 1.0,
                    center: Optional[Sequence[float]] = None,
                    radius: Optional[float] = None,
                    ) -> WeightedEnergy:
    """F_T = sum_i int omega_T ((1/T) phi_i^2 + |grad phi_i|^2 + (1/T) |g_i|^2 + |grad g_i|^2)

    With radius set, the integral is restricted to B_radius.
    """
    grid = bundle.grid
    T = bundle.T
    h = grid.spacing
    weight, mass = exponential_weight(grid, T, kappa, center)
    if radius is not None:
        weight = weight * ball_mask(grid, center, radius)
    chi = edge_chi(bundle.field)
    total = 0.0
    for entry in bundle.directions:
        phi = entry.phi.data
        density = phi ** 2 / T + np.sum((forward_gradient(phi, h) * chi) ** 2, axis=0)
        if entry.g is not None:
            g = entry.g.data
            density = density + np.sum(g ** 2, axis=0) / T
            density = density + sum(np.sum(forward_gradient(component, h) ** 2, axis=0) for component in g)
        total += float(np.sum(weight * density))
    return WeightedEnergy(value=grid.cell_volume * total, weight_mass=mass)


def decay_quantity(bundle: CorrectorBundle) -> float:
    """Torus average of sum_i (1/T) (phi_i^ext)^2 + (1/T) |g_i|^2 + |grad g_i|^2"""
    grid = bundle.grid
    T = bundle.T
    total = np.zeros(grid.shape)
    for entry in bundle.directions:
        if entry.g is None:
            raise ValueError("decay_quantity needs a bundle computed with g_T")
        g = entry.g.data
        total += entry.phi_ext.data ** 2 / T + np.sum(g ** 2, axis=0) / T
        total += sum(np.sum(forward_gradient(component, grid.spacing) ** 2, axis=0) for component in g)
    return float(total.mean())
