"""
Monte-Carlo driver: seed splitting, replicated runs, aggregation and fits
"""

from .seeds import EXTENSION_STREAM, FIT_STREAM, PROBE_STREAM, PROFILE_STREAM, sample_seeds, split, stream_seed
from .stats import (
    ConfidenceInterval,
    DecayFit,
    ScalingFit,
    TailFit,
    aggregate,
    bootstrap,
    fit_decay,
    fit_variance_scaling,
    hazen_survival,
    percentile_interval,
    rstar_tail_fit,
)
from .runner import (
    EnsembleReport,
    SampleTask,
    a_hom_columns,
    aggregate_rows,
    build_tasks,
    decay_config,
    decay_fit_T,
    extension_constants,
    row_columns,
    run_ensemble,
    run_ensemble_async,
    run_sample,
    variance_config,
    variance_scaling,
    variance_scaling_async,
)
