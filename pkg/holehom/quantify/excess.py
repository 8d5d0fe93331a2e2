import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from holehom.corrector import CorrectorBundle
from holehom.errors import SingularGram
from holehom.field import GridField
from holehom.quantify.balls import ball_mask, edge_chi, fint

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ExcessResult:
    value: float
    xi: Tuple[float, ...]
    energy: float
    condition: float
    clamped: bool = False


def _gradient_data(grad_u: Union[GridField, np.ndarray]) -> np.ndarray:
    return grad_u.data if isinstance(grad_u, GridField) else np.asarray(grad_u, dtype=float)


def trial_gradient(bundle: CorrectorBundle, xi) -> np.ndarray:
    """xi + grad phi_xi, built by linearity from the unit-direction correctors"""
    return np.tensordot(np.asarray(xi, dtype=float), bundle.corrected_gradients(), axes=1)


def gram_system(bundle: CorrectorBundle, mask: np.ndarray, grad_u: Optional[np.ndarray] = None):
    """G_ij = fint chi (e_i + grad phi_i).(e_j + grad phi_j) and b_i = fint chi grad u.(e_i + grad phi_i)"""
    chi = edge_chi(bundle.field)
    family = bundle.corrected_gradients() * chi
    d = bundle.dimension
    gram = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            gram[i, j] = gram[j, i] = float(fint(np.sum(family[i] * family[j], axis=0), mask))
    if grad_u is None:
        return gram, None
    masked = grad_u * chi
    b = np.array([float(fint(np.sum(masked * family[i], axis=0), mask)) for i in range(d)])
    return gram, b


def excess(grad_u: Union[GridField, np.ndarray],
           bundle: CorrectorBundle,
           r: float,
           center: Optional[Sequence[float]] = None,
           ) -> ExcessResult:
    """Distance of grad u from the corrected affine family {xi + grad phi_xi} on B_r

    Args:
        grad_u: Edge gradient of u, shape (d,) + grid shape
        bundle: Correctors for every unit direction
        r: Ball radius, at least 2h
        center: Ball center, the origin by default

    Raises:
        SingularGram: the Gram matrix is numerically singular on the ball
    """
    grid = bundle.grid
    if r < 2.0 * grid.spacing * (1.0 - 1e-12):
        raise ValueError(f"Excess radius {r} below 2h = {2.0 * grid.spacing}")
    mask = ball_mask(grid, center, r)
    grad = _gradient_data(grad_u)
    gram, b = gram_system(bundle, mask, grad)
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularGram(f"Gram matrix on B_{r:.4g} has condition {condition:.3e}", condition)
    energy = float(fint(np.sum((grad * edge_chi(bundle.field)) ** 2, axis=0), mask))
    xi = np.linalg.solve(gram, b)
    value = energy - float(b @ xi)
    clamped = False
    if value < 0.0:
        logger.debug(f"Excess round-off {value:.3e} clamped to 0")
        value, clamped = 0.0, True
    return ExcessResult(value=value, xi=tuple(float(x) for x in xi), energy=energy, condition=condition, clamped=clamped)


def nondegeneracy_bounds(bundle: CorrectorBundle, r: float, center: Optional[Sequence[float]] = None) -> Tuple[float, float, float]:
    """Extreme eigenvalues of the Gram matrix on B_r and the constant C = max(lambda_max, 1/lambda_min)"""
    gram, _ = gram_system(bundle, ball_mask(bundle.grid, center, r))
    eigenvalues = np.linalg.eigvalsh(gram)
    low, high = float(eigenvalues[0]), float(eigenvalues[-1])
    constant = max(high, 1.0 / low) if low > 0 else float("inf")
    return low, high, constant
