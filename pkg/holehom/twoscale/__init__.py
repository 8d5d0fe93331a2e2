"""
Two-scale expansion experiment: epsilon problem, defect and rate fit
"""

from .experiment import (
    DEFECT_COLUMNS,
    DefectRow,
    RateFit,
    TrigForcing,
    TwoScaleReport,
    TwoScaleTask,
    ball_average,
    cell_bundle,
    cell_resolution,
    centered_gradient,
    check_scale,
    epsilon_field,
    forcing_divergence,
    forcing_from_config,
    rate_fit,
    run_task,
    run_twoscale,
    run_twoscale_async,
    solve_eps_problem,
    solve_homogenized,
    two_scale_defect,
)
