import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from holehom.field.grid import Grid
from holehom.geometry import InclusionSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoefficientProfile:
    """Matrix coefficient values before holes are cut out

    kind "constant" uses a0 everywhere, "iid_uniform" draws i.i.d. cell values
    in [a_minus, a_plus] from seed, "stripes" cycles through values in slabs of
    width cells along axis.
    """

    kind: str = "constant"
    a0: float = 1.0
    a_minus: Optional[float] = None
    a_plus: Optional[float] = None
    seed: int = 0
    values: Tuple[float, ...] = ()
    axis: int = 0
    width: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "iid_uniform", "stripes"):
            raise ValueError(f"Unknown coefficient profile: {self.kind}")
        if self.kind == "constant" and not self.a0 > 0:
            raise ValueError(f"Constant coefficient must be positive, got {self.a0}")
        if self.kind == "iid_uniform" and (self.a_minus is None or self.a_plus is None):
            raise ValueError("iid_uniform profile needs a_minus and a_plus")
        if self.kind == "stripes" and (not self.values or min(self.values) <= 0 or self.width < 1):
            raise ValueError("stripes profile needs positive values and width >= 1")

    @property
    def bounds(self) -> Tuple[float, float]:
        if self.kind == "constant":
            low, high = self.a0, self.a0
        elif self.kind == "stripes":
            low, high = min(self.values), max(self.values)
        else:
            low, high = self.a_minus, self.a_plus
        low = low if self.a_minus is None else self.a_minus
        high = high if self.a_plus is None else self.a_plus
        if not 0 < low <= high:
            raise ValueError(f"Ellipticity bounds must satisfy 0 < a_minus <= a_plus, got ({low}, {high})")
        return float(low), float(high)

    def cell_values(self, grid: Grid) -> np.ndarray:
        if self.kind == "constant":
            return np.full(grid.shape, float(self.a0))
        if self.kind == "iid_uniform":
            rng = np.random.default_rng(self.seed)
            return rng.uniform(self.a_minus, self.a_plus, size=grid.shape)
        if not 0 <= self.axis < grid.dimension:
            raise ValueError(f"Stripe axis {self.axis} outside dimension {grid.dimension}")
        index = np.arange(grid.cells_per_side) // self.width % len(self.values)
        profile = np.asarray(self.values, dtype=float)[index]
        shape = [1] * grid.dimension
        shape[self.axis] = grid.cells_per_side
        return np.broadcast_to(profile.reshape(shape), grid.shape).copy()


def edge_conductances(matrix_mask: np.ndarray, cell_value: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Conductance of the edge from x to x + e_k for every axis k

    Arithmetic mean of the two cell values, zero when either cell is a hole.
    """
    conductances = []
    for axis in range(matrix_mask.ndim):
        neighbour_mask = np.roll(matrix_mask, -1, axis=axis)
        neighbour_value = np.roll(cell_value, -1, axis=axis)
        conductance = np.where(matrix_mask & neighbour_mask, 0.5 * (cell_value + neighbour_value), 0.0)
        conductance.setflags(write=False)
        conductances.append(conductance)
    return tuple(conductances)


@dataclass(frozen=True)
class CoefficientField:
    """Degenerate coefficient field a = chi_M a on a periodic grid"""

    grid: Grid
    matrix_mask: np.ndarray
    cell_value: np.ndarray
    edge_conductance: Tuple[np.ndarray, ...]
    a_minus: float
    a_plus: float
    inclusion_set: Optional[InclusionSet] = None
    profile: Optional[CoefficientProfile] = None
    tile_count: int = 1
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @classmethod
    def from_cell_values(cls,
                         grid: Grid,
                         matrix_mask: np.ndarray,
                         values: np.ndarray,
                         a_minus: float,
                         a_plus: float,
                         inclusion_set: Optional[InclusionSet] = None,
                         profile: Optional[CoefficientProfile] = None,
                         tile_count: int = 1,
                         warnings: Tuple[str, ...] = (),
                         ) -> "CoefficientField":
        matrix_mask = np.array(matrix_mask, dtype=bool)
        values = np.asarray(values, dtype=float)
        if matrix_mask.shape != grid.shape or values.shape != grid.shape:
            raise ValueError(f"Mask and values must have grid shape {grid.shape}")
        if not 0 < a_minus <= a_plus:
            raise ValueError(f"Ellipticity bounds must satisfy 0 < a_minus <= a_plus, got ({a_minus}, {a_plus})")
        matrix_values = values[matrix_mask]
        if matrix_values.size and (matrix_values.min() < a_minus or matrix_values.max() > a_plus):
            raise ValueError(
                f"Matrix values [{matrix_values.min()}, {matrix_values.max()}] leave [{a_minus}, {a_plus}]"
            )
        cell_value = np.where(matrix_mask, values, 0.0)
        matrix_mask.setflags(write=False)
        cell_value.setflags(write=False)
        return cls(
            grid=grid,
            matrix_mask=matrix_mask,
            cell_value=cell_value,
            edge_conductance=edge_conductances(matrix_mask, cell_value),
            a_minus=float(a_minus),
            a_plus=float(a_plus),
            inclusion_set=inclusion_set,
            profile=profile,
            tile_count=tile_count,
            warnings=tuple(warnings),
        )

    @property
    def matrix_fraction(self) -> float:
        return float(self.matrix_mask.mean())

    @property
    def hole_fraction(self) -> float:
        return 1.0 - self.matrix_fraction

    def edge_matrix_mask(self, axis: int) -> np.ndarray:
        """True on edges x -> x + e_axis with both cells in the matrix"""
        return self.matrix_mask & np.roll(self.matrix_mask, -1, axis=axis)

    def tile(self, count: int) -> "CoefficientField":
        """count^d copies of this cell, rescaled onto the unit torus"""
        if count < 1 or count & (count - 1):
            raise ValueError(f"Tile count must be a power of two, got {count}")
        grid = Grid(self.grid.dimension, self.grid.cells_per_side * count, 1.0)
        reps = (count,) * self.grid.dimension
        return CoefficientField.from_cell_values(
            grid,
            np.tile(self.matrix_mask, reps),
            np.tile(self.cell_value, reps),
            self.a_minus,
            self.a_plus,
            tile_count=self.tile_count * count,
        )


def _window(center: float, radius: float, grid: Grid) -> np.ndarray:
    """Periodic cell indices along one axis whose centers may lie within radius of center"""
    h = grid.spacing
    n = grid.cells_per_side
    low = int(np.floor((center - radius) / h - 0.5))
    high = int(np.ceil((center + radius) / h - 0.5))
    if high - low + 1 >= n:
        return np.arange(n)
    return np.unique(np.arange(low, high + 1) % n)


def hole_mask(inclusion_set: InclusionSet, grid: Grid) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """Cells whose centers lie strictly inside some inclusion, plus coarse-resolution warnings"""
    holes = np.zeros(grid.shape, dtype=bool)
    warnings = []
    axis = grid.axis_coordinates()
    L = grid.box_side
    for index, inclusion in enumerate(inclusion_set.inclusions):
        windows = [_window(c, inclusion.radius, grid) for c in inclusion.center]
        squared = np.zeros([len(w) for w in windows])
        for k, (w, c) in enumerate(zip(windows, inclusion.center)):
            delta = (axis[w] - c + 0.5 * L) % L - 0.5 * L
            shape = [1] * grid.dimension
            shape[k] = len(w)
            squared = squared + (delta ** 2).reshape(shape)
        inside = squared < inclusion.radius ** 2
        if not inside.any():
            message = f"inclusion {index} (radius {inclusion.radius:.4g}) covers no cell center at n={grid.cells_per_side}"
            logger.warning(f"Resolution too coarse: {message}")
            warnings.append(message)
            continue
        region = np.ix_(*windows)
        holes[region] |= inside
    return holes, tuple(warnings)


def rasterize(inclusion_set: InclusionSet, resolution: int, profile: Optional[CoefficientProfile] = None) -> CoefficientField:
    """Cut the inclusions out of the matrix profile on an n^d grid

    Args:
        inclusion_set: Geometry to rasterize; fixes d and L
        resolution: Cells per side n
        profile: Matrix coefficient values, constant 1 by default

    Returns:
        CoefficientField with cell-center hole test and mean edge conductances
    """
    profile = profile or CoefficientProfile()
    grid = Grid(inclusion_set.dimension, resolution, inclusion_set.box_side)
    holes, warnings = hole_mask(inclusion_set, grid)
    a_minus, a_plus = profile.bounds
    field_ = CoefficientField.from_cell_values(
        grid,
        ~holes,
        profile.cell_values(grid),
        a_minus,
        a_plus,
        inclusion_set=inclusion_set,
        profile=profile,
        warnings=warnings,
    )
    logger.debug(f"Rasterized {len(inclusion_set)} inclusions at n={resolution}: hole fraction {field_.hole_fraction:.5f}")
    return field_


def matrix_components(field_or_mask) -> Tuple[int, int, np.ndarray]:
    """Connected components of matrix cells under face adjacency with periodic wrap

    Returns:
        (component count, size of the largest component, labels with 0 on holes)
    """
    mask = field_or_mask.matrix_mask if isinstance(field_or_mask, CoefficientField) else np.asarray(field_or_mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return 0, 0, labels

    # Glue labels that touch across a periodic face
    rows, cols = [], []
    for axis in range(mask.ndim):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        joined = (first > 0) & (last > 0)
        rows.append(first[joined])
        cols.append(last[joined])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(count + 1, count + 1))
    _, merged = connected_components(graph, directed=False)

    # Label 0 (holes) is its own node; renumber the rest 1..components
    matrix_nodes = np.unique(merged[1:])
    renumber = np.zeros(merged.max() + 1, dtype=int)
    renumber[matrix_nodes] = np.arange(1, len(matrix_nodes) + 1)
    lookup = np.concatenate([[0], renumber[merged[1:]]])
    components = lookup[labels]
    sizes = np.bincount(components.ravel())[1:]
    return len(matrix_nodes), int(sizes.max()), components
