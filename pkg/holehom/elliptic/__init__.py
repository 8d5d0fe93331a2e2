"""
Masked CG for the massive operator, Fourier solvers and the discrete extension operator
"""

from .massive import (
    MassiveOperator,
    SolveStats,
    SolverConfig,
    divergence_rhs,
    edge_divergence,
    edge_flux,
    solve_massive,
)
from .spectral import (
    LAPLACE,
    MASSIVE,
    apply_operator,
    backward_difference,
    forward_difference,
    forward_gradient,
    forward_symbols,
    laplacian_symbol,
    solve_constant_coefficient,
    solve_spectral,
)
from .extension import extension_bounds, harmonic_extension
