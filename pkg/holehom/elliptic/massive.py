import logging
import time
from dataclasses import asdict, dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import LinearOperator, cg

from holehom.errors import NonConvergence
from holehom.field import CoefficientField, GridField, MaskKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    relative_tolerance: float = 1e-10
    max_iterations: Optional[int] = None
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not 0 < self.relative_tolerance < 1:
            raise ValueError(f"relative_tolerance must lie in (0, 1), got {self.relative_tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.preconditioner not in ("none", "diagonal"):
            raise ValueError(f"Unknown preconditioner: {self.preconditioner}")

    def iteration_limit(self, cells_per_side: int) -> int:
        return self.max_iterations if self.max_iterations is not None else 50 * cells_per_side


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    seconds: float
    op: str = "massive"
    n: int = 0
    T: float = 0.0

    def to_row(self) -> dict:
        return asdict(self)


class MassiveOperator:
    """Sparse massive operator restricted to matrix cells

    Row x reads (h^d/T) u_x + h^(d-2) sum_y a_xy (u_x - u_y), with the sum
    over the 2d face neighbours y of x.
    """

    def __init__(self, field: CoefficientField, T: float):
        if not T > 0:
            raise ValueError(f"T must be positive, got {T}")
        self.field = field
        self.T = float(T)
        grid = field.grid
        d, h = grid.dimension, grid.spacing

        flat_mask = field.matrix_mask.ravel()
        self.cells = np.flatnonzero(flat_mask)
        self.position = np.full(grid.size, -1, dtype=np.int64)
        self.position[self.cells] = np.arange(len(self.cells))

        index = np.arange(grid.size).reshape(grid.shape)
        rows, cols, vals = [], [], []
        diagonal = np.full(len(self.cells), grid.cell_volume / self.T)
        scale = h ** (d - 2)
        for axis in range(d):
            conductance = field.edge_conductance[axis].ravel()
            source = index.ravel()
            target = np.roll(index, -1, axis=axis).ravel()
            active = conductance > 0
            i = self.position[source[active]]
            j = self.position[target[active]]
            weight = scale * conductance[active]
            rows.extend([i, j])
            cols.extend([j, i])
            vals.extend([-weight, -weight])
            np.add.at(diagonal, i, weight)
            np.add.at(diagonal, j, weight)
        m = len(self.cells)
        rows.append(np.arange(m))
        cols.append(np.arange(m))
        vals.append(diagonal)
        self.matrix: csr_matrix = coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
        ).tocsr()
        self.diagonal = diagonal

    @property
    def size(self) -> int:
        return len(self.cells)

    def gather(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float).ravel()[self.cells]

    def scatter(self, vector: np.ndarray) -> np.ndarray:
        full = np.zeros(self.field.grid.size)
        full[self.cells] = vector
        return full.reshape(self.field.grid.shape)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Operator applied to a full-grid array, zero on holes"""
        return self.scatter(self.matrix @ self.gather(values))

    def solve(self, rhs: Union[GridField, np.ndarray], cfg: Optional[SolverConfig] = None) -> Tuple[GridField, SolveStats]:
        cfg = cfg or SolverConfig()
        grid = self.field.grid
        data = rhs.data if isinstance(rhs, GridField) else np.asarray(rhs, dtype=float)
        b = self.gather(data)
        started = time.perf_counter()
        norm_b = float(np.linalg.norm(b))
        if norm_b == 0.0 or self.size == 0:
            stats = SolveStats(0, 0.0, time.perf_counter() - started, n=grid.cells_per_side, T=self.T)
            return GridField.scalar(grid, np.zeros(grid.shape), MaskKind.MATRIX_ONLY), stats

        preconditioner = None
        if cfg.preconditioner == "diagonal":
            inverse = 1.0 / self.diagonal
            preconditioner = LinearOperator(self.matrix.shape, matvec=lambda x: inverse * x)

        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        limit = cfg.iteration_limit(grid.cells_per_side)
        tolerance = cfg.relative_tolerance
        x, info = cg(self.matrix, b, rtol=tolerance, maxiter=limit, M=preconditioner, callback=count)
        residual = float(np.linalg.norm(b - self.matrix @ x)) / norm_b
        if info == 0 and residual > tolerance:
            # Recurrence residual drifted from the true one, restart from x
            x, info = cg(self.matrix, b, x0=x, rtol=tolerance, maxiter=limit, M=preconditioner, callback=count)
            residual = float(np.linalg.norm(b - self.matrix @ x)) / norm_b

        stats = SolveStats(iterations, residual, time.perf_counter() - started, n=grid.cells_per_side, T=self.T)
        logger.debug(f"Massive solve n={grid.cells_per_side} T={self.T:.4g}: {iterations} iterations, residual {residual:.3e}")
        if info != 0 or residual > tolerance:
            raise NonConvergence(
                f"CG stopped at residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.1e})",
                stats=stats,
            )
        return GridField.scalar(grid, self.scatter(x), MaskKind.MATRIX_ONLY), stats


def solve_massive(field: CoefficientField,
                  T: float,
                  rhs: Union[GridField, np.ndarray],
                  cfg: Optional[SolverConfig] = None,
                  ) -> Tuple[GridField, SolveStats]:
    """Solve the massive degenerate system on matrix cells

    Args:
        field: Coefficient field fixing the matrix cells and conductances
        T: Massive time scale, T > 0
        rhs: Per-cell right-hand side; hole values are ignored
        cfg: Tolerance, iteration limit and preconditioner

    Returns:
        Matrix-only scalar field and its SolveStats

    Raises:
        NonConvergence: residual above tolerance at the iteration limit
    """
    return MassiveOperator(field, T).solve(rhs, cfg)


def divergence_rhs(field: CoefficientField, xi) -> np.ndarray:
    """Cellwise h^d div(a xi), the right-hand side of the corrector equation"""
    grid = field.grid
    xi = np.asarray(xi, dtype=float)
    rhs = np.zeros(grid.shape)
    for axis in range(grid.dimension):
        if xi[axis] == 0.0:
            continue
        conductance = field.edge_conductance[axis]
        rhs += xi[axis] * (conductance - np.roll(conductance, 1, axis=axis))
    return grid.spacing ** (grid.dimension - 1) * np.where(field.matrix_mask, rhs, 0.0)


def edge_flux(field: CoefficientField, u: np.ndarray, xi) -> np.ndarray:
    """a_e (forward difference of u + xi_k) on every edge x -> x + e_k, zero on degenerate edges"""
    grid = field.grid
    h = grid.spacing
    xi = np.asarray(xi, dtype=float)
    flux = np.zeros((grid.dimension,) + grid.shape)
    for axis in range(grid.dimension):
        gradient = (np.roll(u, -1, axis=axis) - u) / h
        flux[axis] = field.edge_conductance[axis] * (gradient + xi[axis])
    return flux


def edge_divergence(flux: np.ndarray, h: float) -> np.ndarray:
    """Backward-difference divergence of an edge flux, the adjoint of the forward gradient"""
    return sum((flux[axis] - np.roll(flux[axis], 1, axis=axis)) / h for axis in range(flux.shape[0]))
