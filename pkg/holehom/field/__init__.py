"""
Periodic grids and the degenerate coefficient fields rasterized onto them
"""

from .grid import FieldKind, Grid, GridField, MaskKind
from .coefficients import (
    CoefficientField,
    CoefficientProfile,
    edge_conductances,
    hole_mask,
    matrix_components,
    rasterize,
)
