"""
Configuration models, run manifests and CSV/JSON output
"""

from .config import (
    DIAGNOSTICS,
    CorrectorConfig,
    EnsembleConfig,
    FieldConfig,
    GeometryConfig,
    ProfileConfig,
    QuantifyConfig,
    RadiusLawConfig,
    RunConfig,
    ScheduleEntry,
    SolverConfig,
    TwoScaleConfig,
    canonical_json,
    config_hash,
    format_validation_error,
    load_config,
    parse_config,
)
from .manifest import MANIFEST_NAME, NoteCollector, RunDirectory, RunManifest, format_value, read_csv, write_csv, write_json
from .serialize import dump_bundle, dump_field, load_inclusions, save_inclusions
