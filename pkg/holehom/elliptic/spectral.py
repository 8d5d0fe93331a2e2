import logging
from typing import Optional, Union

import numpy as np

from holehom.field import FieldKind, Grid, GridField, MaskKind

logger = logging.getLogger(__name__)

LAPLACE = "laplace"
MASSIVE = "massive"


def _angles(grid: Grid) -> list:
    """Per-axis phase 2 pi k / n broadcast to the grid shape"""
    theta = 2.0 * np.pi * np.fft.fftfreq(grid.cells_per_side)
    angles = []
    for axis in range(grid.dimension):
        shape = [1] * grid.dimension
        shape[axis] = grid.cells_per_side
        angles.append(theta.reshape(shape))
    return angles


def forward_symbols(grid: Grid) -> list:
    """Fourier symbols (e^(i theta) - 1) / h of the forward differences"""
    return [(np.exp(1j * theta) - 1.0) / grid.spacing for theta in _angles(grid)]


def laplacian_symbol(grid: Grid) -> np.ndarray:
    """Symbol of the 2d-point -Laplacian, sum_j (4/h^2) sin^2(pi k_j / n)"""
    symbol = np.zeros(grid.shape)
    for theta in _angles(grid):
        symbol = symbol + (4.0 / grid.spacing ** 2) * np.sin(0.5 * theta) ** 2
    return symbol


def _operator_symbol(grid: Grid, operator: str, T: Optional[float]) -> np.ndarray:
    symbol = laplacian_symbol(grid)
    if operator == MASSIVE:
        if T is None or not T > 0:
            raise ValueError(f"Massive operator needs T > 0, got {T}")
        return symbol + 1.0 / T
    if operator != LAPLACE:
        raise ValueError(f"Unknown spectral operator: {operator}")
    return symbol


def _solve_scalar(rhs: np.ndarray, symbol: np.ndarray, operator: str) -> np.ndarray:
    if operator == LAPLACE:
        mean = float(rhs.mean())
        if mean != 0.0:
            logger.debug(f"Subtracting mean {mean:.3e} from Laplace right-hand side")
    transformed = np.fft.fftn(rhs)
    if operator == LAPLACE:
        transformed[(0,) * rhs.ndim] = 0.0
        safe = symbol.copy()
        safe[(0,) * rhs.ndim] = 1.0
        return np.fft.ifftn(transformed / safe).real
    return np.fft.ifftn(transformed / symbol).real


def solve_spectral(rhs: Union[GridField, np.ndarray],
                   operator: str = LAPLACE,
                   T: Optional[float] = None,
                   grid: Optional[Grid] = None,
                   ) -> GridField:
    """Exact Fourier solve of -Lap u = rhs or (1/T - Lap) u = rhs on the torus

    Vector and tensor fields are solved component by component. For -Lap the
    mean of the right-hand side is removed and the solution has zero mean.
    """
    if isinstance(rhs, GridField):
        grid, kind, components, data = rhs.grid, rhs.kind, rhs.components, rhs.data
    else:
        if grid is None:
            raise ValueError("A grid is required for array right-hand sides")
        data = np.asarray(rhs, dtype=float)
        kind = FieldKind.SCALAR if data.shape == grid.shape else FieldKind.VECTOR
        components = ()
    symbol = _operator_symbol(grid, operator, T)
    if kind is FieldKind.SCALAR:
        solution = _solve_scalar(data, symbol, operator)
    else:
        solution = np.stack([_solve_scalar(part, symbol, operator) for part in data])
    return GridField(grid=grid, data=solution, kind=kind, mask=MaskKind.EVERYWHERE, components=components)


def apply_operator(u: np.ndarray, grid: Grid, operator: str = LAPLACE, T: Optional[float] = None) -> np.ndarray:
    """Apply -Lap (or 1/T - Lap) with the real-space 2d+1 point stencil"""
    u = np.asarray(u, dtype=float)
    result = np.zeros_like(u)
    for axis in range(grid.dimension):
        result += (2.0 * u - np.roll(u, 1, axis=axis) - np.roll(u, -1, axis=axis)) / grid.spacing ** 2
    if operator == MASSIVE:
        if T is None or not T > 0:
            raise ValueError(f"Massive operator needs T > 0, got {T}")
        result += u / T
    return result


def forward_difference(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(u, -1, axis=axis) - u) / h


def backward_difference(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (u - np.roll(u, 1, axis=axis)) / h


def forward_gradient(u: np.ndarray, h: float) -> np.ndarray:
    return np.stack([forward_difference(u, axis, h) for axis in range(u.ndim)])


def solve_constant_coefficient(rhs: np.ndarray, a, grid: Grid, T: Optional[float] = None) -> np.ndarray:
    """Solve (1/T) u - div(a grad u) = rhs for a constant symmetric matrix a

    The discrete operator is -sum_jk D-_j a_jk D+_k. Without T the mean of rhs
    is dropped and the zero-mean solution is returned.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (grid.dimension, grid.dimension):
        raise ValueError(f"Coefficient matrix must be {grid.dimension}x{grid.dimension}, got {a.shape}")
    a = 0.5 * (a + a.T)
    derivatives = forward_symbols(grid)
    symbol = np.zeros(grid.shape)
    for j in range(grid.dimension):
        for k in range(grid.dimension):
            symbol = symbol + a[j, k] * (np.conj(derivatives[j]) * derivatives[k]).real
    transformed = np.fft.fftn(np.asarray(rhs, dtype=float))
    origin = (0,) * grid.dimension
    if T is None:
        transformed[origin] = 0.0
        symbol[origin] = 1.0
    else:
        if not T > 0:
            raise ValueError(f"T must be positive, got {T}")
        symbol = symbol + 1.0 / T
    return np.fft.ifftn(transformed / symbol).real
