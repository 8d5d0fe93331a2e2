"""
Massive correctors, fluxes, flux corrector, g_T and the homogenized coefficient
"""

from .bundle import CorrectorBundle, DirectionalCorrector, HomogenizedEstimate
from .compute import (
    SYMMETRY_TOLERANCE,
    cell_average,
    compute_bundle,
    default_T,
    flux,
    flux_corrector,
    flux_divergence,
    homogenized_estimate,
    massive_aux_field,
    massive_corrector,
    sigma_component,
    sigma_divergence,
    voigt_bound,
)
