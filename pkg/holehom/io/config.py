import hashlib
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from holehom import elliptic
from holehom.errors import AdmissibilityError, ConfigError
from holehom.field import CoefficientProfile
from holehom.geometry import (
    GeneratorTag,
    InclusionSampler,
    InclusionSet,
    LatticeIIDSampler,
    PoissonHardcoreSampler,
    RadiusLaw,
    RandomParkingSampler,
    check_admissible,
)

logger = logging.getLogger(__name__)

Diagnostic = Literal["rstar", "hole_filling", "decay", "excess_decay", "mean_value", "growth", "caccioppoli", "extension"]
DIAGNOSTICS = get_args(Diagnostic)


def _power_of_two(n: int) -> bool:
    return n >= 4 and not n & (n - 1)


class StrictModel(BaseModel):
    """Frozen model rejecting unknown keys"""

    model_config = ConfigDict(extra="forbid", frozen=True)


class RadiusLawConfig(StrictModel):
    kind: Literal["uniform", "point", "discrete"] = "uniform"
    low: float = 0.0
    high: float = 0.2
    value: float = 0.0
    values: List[float] = Field(default_factory=list)
    weights: List[float] = Field(default_factory=list)

    def to_law(self) -> RadiusLaw:
        return RadiusLaw(
            kind=self.kind,
            low=self.low,
            high=self.high,
            value=self.value,
            values=tuple(self.values),
            weights=tuple(self.weights),
        )


class InclusionConfig(StrictModel):
    center: List[float]
    radius: float = Field(gt=0)


class GeometryConfig(StrictModel):
    """Generator tag plus the parameters of the chosen sampler

    Only the fields of the selected generator are read; "Explicit" takes the
    inclusions list verbatim.
    """

    generator: Literal["LatticeIID", "PoissonHardcore", "RandomParking", "Explicit"] = "LatticeIID"
    dimension: Literal[2, 3] = 2
    box_side: float = Field(default=16.0, gt=0)
    diameter_cap: float = Field(default=0.5, gt=0, le=1)
    seed: int = Field(default=0, ge=0)
    # LatticeIID
    radius_law: RadiusLawConfig = Field(default_factory=RadiusLawConfig)
    separation: Optional[float] = Field(default=None, gt=0)
    truncate: bool = True
    # PoissonHardcore
    intensity: float = Field(default=1.0, gt=0)
    radius_cap: float = Field(default=0.2, gt=0)
    point_budget: int = Field(default=1_000_000, ge=1)
    # RandomParking
    exclusion_radius: float = Field(default=0.4, gt=0)
    slack: Optional[float] = Field(default=None, gt=0)
    rejection_cap: Optional[int] = Field(default=None, ge=1)
    batch_size: int = Field(default=4096, ge=1)
    # Explicit
    inclusions: List[InclusionConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_generator(self):
        if self.generator == "LatticeIID" and self.box_side != int(self.box_side):
            raise ValueError("LatticeIID needs an integer box_side")
        if self.generator == "Explicit" and self.separation is None:
            raise ValueError("Explicit geometry needs a separation")
        for inclusion in self.inclusions:
            if len(inclusion.center) != self.dimension:
                raise ValueError(f"inclusion center {inclusion.center} does not match dimension {self.dimension}")
        return self

    def build_sampler(self, box_side: Optional[float] = None) -> InclusionSampler:
        """Sampler for this geometry, optionally rescaled to another box side"""
        L = self.box_side if box_side is None else box_side
        if self.generator == "LatticeIID":
            return LatticeIIDSampler(
                int(L), self.dimension, self.radius_law.to_law(), self.diameter_cap, self.separation, self.truncate
            )
        if self.generator == "PoissonHardcore":
            return PoissonHardcoreSampler(
                L, self.dimension, self.intensity, self.radius_cap, self.diameter_cap, self.point_budget
            )
        if self.generator == "RandomParking":
            return RandomParkingSampler(
                L, self.dimension, self.exclusion_radius, self.diameter_cap, self.slack, self.rejection_cap, self.batch_size
            )
        raise ValueError("Explicit geometry has no sampler")

    def sample(self, seed: Optional[int] = None, box_side: Optional[float] = None) -> InclusionSet:
        seed = self.seed if seed is None else seed
        if self.generator != "Explicit":
            return self.build_sampler(box_side).sample(seed)
        if box_side is not None and box_side != self.box_side:
            raise ValueError(f"Explicit geometry is fixed at L={self.box_side}, cannot rescale to {box_side}")
        inclusion_set = InclusionSet.from_arrays(
            [inclusion.center for inclusion in self.inclusions],
            [inclusion.radius for inclusion in self.inclusions],
            box_side=self.box_side,
            dimension=self.dimension,
            separation=self.separation,
            diameter_cap=self.diameter_cap,
            seed=seed,
            generator_tag=GeneratorTag.EXPLICIT,
        )
        report = check_admissible(inclusion_set)
        if not report.ok:
            raise AdmissibilityError(
                f"Explicit inclusions are not admissible (max diameter {report.max_diameter:.4g}, "
                f"separation ratio {report.min_separation_ratio:.4g})"
            )
        return inclusion_set


class ProfileConfig(StrictModel):
    kind: Literal["constant", "iid_uniform", "stripes"] = "constant"
    a0: float = Field(default=1.0, gt=0)
    a_minus: Optional[float] = Field(default=None, gt=0)
    a_plus: Optional[float] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0)
    values: List[float] = Field(default_factory=list)
    axis: int = Field(default=0, ge=0)
    width: int = Field(default=1, ge=1)

    def to_profile(self, seed: Optional[int] = None) -> CoefficientProfile:
        return CoefficientProfile(
            kind=self.kind,
            a0=self.a0,
            a_minus=self.a_minus,
            a_plus=self.a_plus,
            seed=self.seed if seed is None else seed,
            values=tuple(self.values),
            axis=self.axis,
            width=self.width,
        )


class FieldConfig(StrictModel):
    """Grid resolution, either fixed or proportional to the box side"""

    cells_per_side: Optional[int] = 64
    cells_per_unit: Optional[int] = Field(default=None, ge=1)
    profile: ProfileConfig = Field(default_factory=ProfileConfig)

    @field_validator("cells_per_side")
    @classmethod
    def _check_cells(cls, value):
        if value is not None and not _power_of_two(value):
            raise ValueError(f"cells_per_side must be a power of two >= 4, got {value}")
        return value

    def resolution(self, box_side: float) -> int:
        if self.cells_per_unit is None:
            return self.cells_per_side
        n = int(round(self.cells_per_unit * box_side))
        if not _power_of_two(n):
            raise ValueError(f"cells_per_unit={self.cells_per_unit} at L={box_side} gives n={n}, not a power of two")
        return n


class SolverConfig(StrictModel):
    relative_tolerance: float = Field(default=1e-10, gt=0, lt=1)
    max_iterations: Optional[int] = Field(default=None, ge=1)
    preconditioner: Literal["none", "diagonal"] = "diagonal"

    def to_solver(self) -> elliptic.SolverConfig:
        return elliptic.SolverConfig(self.relative_tolerance, self.max_iterations, self.preconditioner)


class CorrectorConfig(StrictModel):
    T: Optional[float] = Field(default=None, gt=0)
    sigma: bool = True
    aux: bool = True
    symmetry_tolerance: float = Field(default=1e-6, gt=0)

    def resolve_T(self, box_side: float) -> float:
        """T defaults to L^2, the scale at which the massive term localizes to the box"""
        return float(box_side) ** 2 if self.T is None else self.T


class QuantifyConfig(StrictModel):
    rstar_threshold_C: float = Field(default=100.0, gt=0)
    radii: Optional[List[float]] = None
    holder_alpha: float = Field(default=0.5, gt=0, lt=1)
    kappa: float = Field(default=1.0, gt=0)
    oscillation_radius_M: float = Field(default=1.0, gt=0)
    center: Optional[List[float]] = None
    locality_radii: List[float] = Field(default_factory=list)
    oscillation_support_r: List[float] = Field(default_factory=list)
    oscillation_stride: Optional[float] = Field(default=None, gt=0)
    caccioppoli_R: Optional[float] = Field(default=None, gt=0)
    caccioppoli_rho: Optional[float] = Field(default=None, gt=0)
    probe_seed: int = Field(default=0, ge=0)
    beta: Optional[float] = Field(default=None, gt=0)

    @field_validator("radii")
    @classmethod
    def _check_radii(cls, value):
        if value is not None and (not value or min(value) <= 0 or list(value) != sorted(value)):
            raise ValueError("radii must be positive and increasing")
        return value

    @model_validator(mode="after")
    def _check_caccioppoli(self):
        if (self.caccioppoli_R is None) != (self.caccioppoli_rho is None):
            raise ValueError("caccioppoli_R and caccioppoli_rho go together")
        if self.caccioppoli_R is not None and not self.caccioppoli_rho < self.caccioppoli_R:
            raise ValueError("caccioppoli_rho must be smaller than caccioppoli_R")
        return self

    @property
    def beta_value(self) -> float:
        return float("inf") if self.beta is None else self.beta


class ScheduleEntry(StrictModel):
    L: float = Field(gt=0)
    n: int
    T: Optional[float] = Field(default=None, gt=0)

    @field_validator("n")
    @classmethod
    def _check_n(cls, value):
        if not _power_of_two(value):
            raise ValueError(f"n must be a power of two >= 4, got {value}")
        return value


class EnsembleConfig(StrictModel):
    schedule: List[ScheduleEntry] = Field(default_factory=lambda: [ScheduleEntry(L=16.0, n=64)])
    sample_count: int = Field(default=10, ge=1)
    master_seed: int = Field(default=0, ge=0)
    diagnostics: List[Diagnostic] = Field(default_factory=list)
    observable: Literal["a11", "cell_mean"] = "a11"
    T_list: List[float] = Field(default_factory=list)
    beta: Optional[float] = Field(default=None, gt=0)
    bootstrap_resamples: int = Field(default=1000, ge=200)
    failure_budget: float = Field(default=0.05, ge=0, lt=1)
    tail_floor: float = Field(default=0.1, ge=0)
    tail_min_samples: int = Field(default=200, ge=3)
    extension_samples: int = Field(default=100, ge=1)

    @field_validator("schedule")
    @classmethod
    def _check_schedule(cls, value):
        if not value:
            raise ValueError("schedule must not be empty")
        return value

    @field_validator("T_list")
    @classmethod
    def _check_T_list(cls, value):
        if any(T <= 0 for T in value):
            raise ValueError("T_list entries must be positive")
        return sorted(value)


class TwoScaleConfig(StrictModel):
    """The microstructure cell is sampled at side cell_side and resolved with cells_per_unit cells per unit length"""

    epsilon_list: List[float] = Field(default_factory=lambda: [0.25, 0.125, 0.0625])
    cell_side: float = Field(default=2.0, gt=0)
    cells_per_unit: int = Field(default=16, ge=1)
    forcing: Literal["trig", "zero"] = "trig"
    amplitude: float = 1.0
    realizations: int = Field(default=1, ge=1)
    T_eps: float = Field(default=1e6, gt=0)
    bootstrap_resamples: int = Field(default=1000, ge=200)

    @field_validator("epsilon_list")
    @classmethod
    def _check_epsilons(cls, value):
        if not value:
            raise ValueError("epsilon_list must not be empty")
        for eps in value:
            m = 1.0 / eps
            if not (eps > 0 and m == int(m) and not int(m) & (int(m) - 1)):
                raise ValueError(f"epsilon {eps} is not 1/2^k")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("epsilon_list must be strictly decreasing")
        return value

    def cell_resolution(self, box_side: float) -> int:
        """Cells per side of one microstructure cell of side box_side, a power of two >= 8"""
        n = int(round(self.cells_per_unit * box_side))
        if n < 8 or not _power_of_two(n):
            raise ValueError(f"cells_per_unit={self.cells_per_unit} at cell side {box_side} gives n={n}, not a power of two >= 8")
        return n


class RunConfig(StrictModel):
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    field: FieldConfig = Field(default_factory=FieldConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    corrector: CorrectorConfig = Field(default_factory=CorrectorConfig)
    quantify: QuantifyConfig = Field(default_factory=QuantifyConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    twoscale: TwoScaleConfig = Field(default_factory=TwoScaleConfig)


def format_validation_error(error: ValidationError) -> str:
    """One "path: message" line per failing location"""
    lines = []
    for detail in error.errors():
        location = ".".join(str(part) for part in detail["loc"]) or "<root>"
        lines.append(f"{location}: {detail['msg']}")
    return "\n".join(lines)


def load_config(document: Union[dict, str]) -> RunConfig:
    """Validate a configuration document (dict or JSON text)

    Raises:
        ConfigError: with path-qualified messages
    """
    try:
        if isinstance(document, str):
            return RunConfig.model_validate_json(document)
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def parse_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
        json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    config = load_config(text)
    logger.debug(f"Parsed config {path}")
    return config


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()
