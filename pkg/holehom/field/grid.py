import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Periodic cell-centered grid of n^d cells on the torus of side L"""

    dimension: int
    cells_per_side: int
    box_side: float

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"Dimension must be 2 or 3, got {self.dimension}")
        n = self.cells_per_side
        if n < 4 or n & (n - 1):
            raise ValueError(f"cells_per_side must be a power of two >= 4, got {n}")
        if not self.box_side > 0:
            raise ValueError(f"Box side must be positive, got {self.box_side}")

    @property
    def spacing(self) -> float:
        return self.box_side / self.cells_per_side

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.cells_per_side,) * self.dimension

    @property
    def size(self) -> int:
        return self.cells_per_side ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def axis_coordinates(self) -> np.ndarray:
        return (np.arange(self.cells_per_side) + 0.5) * self.spacing

    def coordinates(self) -> np.ndarray:
        """Cell-center coordinates, shape (d,) + grid shape"""
        axis = self.axis_coordinates()
        return np.stack(np.meshgrid(*([axis] * self.dimension), indexing="ij"))

    def displacement_from(self, center: Sequence[float]) -> np.ndarray:
        """Periodic displacement x - center of every cell, shape (d,) + grid shape"""
        center = np.asarray(center, dtype=float).reshape((self.dimension,) + (1,) * self.dimension)
        delta = self.coordinates() - center
        return (delta + 0.5 * self.box_side) % self.box_side - 0.5 * self.box_side

    def distance_from(self, center: Sequence[float]) -> np.ndarray:
        return np.sqrt(np.sum(self.displacement_from(center) ** 2, axis=0))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dimension, self.cells_per_side * factor, self.box_side)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "cells_per_side": self.cells_per_side, "box_side": self.box_side}


class FieldKind(str, Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    TENSOR = "tensor"


class MaskKind(str, Enum):
    EVERYWHERE = "everywhere"
    MATRIX_ONLY = "matrix-only"


@dataclass(frozen=True)
class GridField:
    """Scalar, vector or tensor data on a grid

    Vector and tensor data carry the component axis first. Matrix-only fields
    hold zeros on hole cells, which carry no meaning.
    """

    grid: Grid
    data: np.ndarray
    kind: FieldKind = FieldKind.SCALAR
    mask: MaskKind = MaskKind.EVERYWHERE
    components: Tuple = field(default_factory=tuple)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if self.kind is FieldKind.SCALAR:
            expected = self.grid.shape
        elif self.kind is FieldKind.VECTOR:
            expected = (self.grid.dimension,) + self.grid.shape
        else:
            expected = (len(self.components),) + self.grid.shape
        if data.shape != expected:
            raise ValueError(f"{self.kind.value} field expects shape {expected}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("Grid field data must be finite")
        data = np.array(data, copy=True)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def scalar(cls, grid: Grid, data, mask: MaskKind = MaskKind.EVERYWHERE) -> "GridField":
        return cls(grid=grid, data=data, kind=FieldKind.SCALAR, mask=mask)

    @classmethod
    def vector(cls, grid: Grid, data, mask: MaskKind = MaskKind.EVERYWHERE) -> "GridField":
        return cls(grid=grid, data=data, kind=FieldKind.VECTOR, mask=mask)

    @classmethod
    def tensor(cls, grid: Grid, data, components: Sequence, mask: MaskKind = MaskKind.EVERYWHERE) -> "GridField":
        return cls(grid=grid, data=data, kind=FieldKind.TENSOR, mask=mask, components=tuple(components))

    @classmethod
    def zeros(cls, grid: Grid, kind: FieldKind = FieldKind.SCALAR, mask: MaskKind = MaskKind.EVERYWHERE) -> "GridField":
        shape = grid.shape if kind is FieldKind.SCALAR else (grid.dimension,) + grid.shape
        return cls(grid=grid, data=np.zeros(shape), kind=kind, mask=mask)

    def mean(self) -> np.ndarray:
        """Spatial mean, per component for vector and tensor fields"""
        if self.kind is FieldKind.SCALAR:
            return np.asarray(self.data.mean())
        spatial = tuple(range(1, self.data.ndim))
        return self.data.mean(axis=spatial)

    def component(self, index) -> np.ndarray:
        if self.kind is FieldKind.SCALAR:
            raise ValueError("Scalar fields have no components")
        if self.kind is FieldKind.TENSOR:
            index = self.components.index(tuple(index)) if not isinstance(index, int) else index
        return self.data[index]

    def restricted(self, matrix_mask: Optional[np.ndarray]) -> "GridField":
        """Zero out hole cells and mark the field matrix-only"""
        if matrix_mask is None:
            return self
        data = np.where(matrix_mask, self.data, 0.0)
        return GridField(grid=self.grid, data=data, kind=self.kind, mask=MaskKind.MATRIX_ONLY, components=self.components)
