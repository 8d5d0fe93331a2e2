from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from holehom.elliptic import SolveStats
from holehom.field import CoefficientField, GridField


@dataclass(frozen=True)
class DirectionalCorrector:
    """Massive corrector and its derived fields for one direction xi"""

    xi: Tuple[float, ...]
    phi: GridField
    phi_ext: GridField
    flux: GridField
    flux_cell: GridField
    stats: SolveStats
    g: Optional[GridField] = None

    def corrected_gradient(self) -> np.ndarray:
        """xi + forward gradient of phi on every edge, meaningful on matrix edges only"""
        grid = self.phi.grid
        u = self.phi.data
        return np.stack([
            (np.roll(u, -1, axis=axis) - u) / grid.spacing + self.xi[axis]
            for axis in range(grid.dimension)
        ])


@dataclass(frozen=True)
class CorrectorBundle:
    """All d directional correctors of one coefficient field at one T"""

    field: CoefficientField
    T: float
    directions: Tuple[DirectionalCorrector, ...]
    sigma: Tuple[GridField, ...] = field(default_factory=tuple)
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dimension(self) -> int:
        return self.field.grid.dimension

    @property
    def grid(self):
        return self.field.grid

    def phi_ext_stack(self) -> np.ndarray:
        return np.stack([direction.phi_ext.data for direction in self.directions])

    def sigma_stack(self) -> np.ndarray:
        """All stored sigma_ijk with j < k, stacked over i"""
        if not self.sigma:
            return np.zeros((0,) + self.grid.shape)
        return np.concatenate([tensor.data for tensor in self.sigma])

    def corrected_gradients(self) -> np.ndarray:
        """e_i + grad phi_i for every direction, shape (d, d) + grid shape"""
        return np.stack([direction.corrected_gradient() for direction in self.directions])

    def combination_phi(self, xi) -> np.ndarray:
        """phi_xi = sum_i xi_i phi_i by linearity of the corrector equation"""
        xi = np.asarray(xi, dtype=float)
        return np.tensordot(xi, np.stack([direction.phi.data for direction in self.directions]), axes=1)

    def stats(self) -> Tuple[SolveStats, ...]:
        return tuple(direction.stats for direction in self.directions)


@dataclass(frozen=True)
class HomogenizedEstimate:
    a_hom: np.ndarray
    volume_fraction_matrix: float
    residuals: Tuple[float, ...]
    n: int
    T: float
    seed: int = 0

    @property
    def symmetry_defect(self) -> float:
        return float(np.linalg.norm(self.a_hom - self.a_hom.T))

    def symmetric_part(self) -> np.ndarray:
        return 0.5 * (self.a_hom + self.a_hom.T)

    def quadratic_form(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.a_hom @ xi)
