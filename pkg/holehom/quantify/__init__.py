"""
Quantitative diagnostics: excess, regularity radius, growth, energies and probes
"""

from .balls import (
    ball_mask,
    dyadic_radii,
    edge_chi,
    exponential_weight,
    fint,
    matrix_point,
    quartic_bump,
    quartic_cutoff,
)
from .fits import (
    GrowthFit,
    LineFit,
    growth_regime,
    implied_moment_exponent,
    loglog_slope,
    select_growth_model,
    slope_through_origin,
)
from .excess import ExcessResult, excess, nondegeneracy_bounds, trial_gradient
from .radius import (
    INFINITE_RADIUS,
    ProfileRow,
    RegularityRadius,
    corrector_growth_profile,
    normalized_oscillation,
    regularity_radius,
)
from .energy import (
    HoleFillingResult,
    WeightedEnergy,
    caccioppoli_check,
    decay_quantity,
    energy_density,
    hole_filling_ratio,
    weighted_energy,
    weighted_mean,
)
from .probes import (
    ExcessDecayResult,
    LocalityResult,
    MeanValueResult,
    a_harmonic_function,
    averaged_gradient,
    excess_decay_profile,
    fit_excess_slope,
    locality_probe,
    masked_gradient,
    mean_value_check,
    mean_value_ratios,
    nondegenerate_excess_rows,
    oscillation_probe,
    oscillation_scan,
    oscillation_shape_fit,
    oscillation_sum,
    probe_center,
)
