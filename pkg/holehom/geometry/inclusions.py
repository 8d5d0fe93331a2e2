import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from holehom.errors import AdmissibilityError

logger = logging.getLogger(__name__)


class GeneratorTag(str, Enum):
    LATTICE_IID = "LatticeIID"
    POISSON_HARDCORE = "PoissonHardcore"
    RANDOM_PARKING = "RandomParking"
    EXPLICIT = "Explicit"


def periodic_displacement(a, b, box_side: float) -> np.ndarray:
    """Minimum-image displacement a - b on the torus of side box_side"""
    delta = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return (delta + 0.5 * box_side) % box_side - 0.5 * box_side


def periodic_distance(a, b, box_side: float) -> np.ndarray:
    return np.linalg.norm(periodic_displacement(a, b, box_side), axis=-1)


def wrap_points(points, box_side: float) -> np.ndarray:
    """Reduce points into [0, L) in every axis"""
    wrapped = np.mod(np.asarray(points, dtype=float), box_side)
    # np.mod can round a tiny negative up to exactly L
    wrapped[wrapped >= box_side] = 0.0
    return wrapped


@dataclass(frozen=True)
class Inclusion:
    """A ball-shaped hole on the torus"""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Inclusion radius must be positive, got {self.radius}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class InclusionSet:
    """Admissible collection of ball inclusions, a deterministic function of
    (generator_tag, parameters, seed)."""

    inclusions: Tuple[Inclusion, ...]
    box_side: float
    dimension: int
    separation: float
    diameter_cap: float = 0.5
    seed: int = 0
    generator_tag: GeneratorTag = GeneratorTag.EXPLICIT
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"Dimension must be 2 or 3, got {self.dimension}")
        if not self.box_side > 0:
            raise ValueError(f"Box side must be positive, got {self.box_side}")
        if not self.separation > 0:
            raise ValueError(f"Separation must be positive, got {self.separation}")
        if not 0 < self.diameter_cap <= 1:
            raise ValueError(f"Diameter cap must lie in (0, 1], got {self.diameter_cap}")
        for inclusion in self.inclusions:
            if len(inclusion.center) != self.dimension:
                raise ValueError(f"Inclusion center {inclusion.center} does not match dimension {self.dimension}")

    @classmethod
    def from_arrays(cls, centers, radii, box_side: float, dimension: int, separation: float, **kwargs) -> "InclusionSet":
        centers = np.asarray(centers, dtype=float).reshape(-1, dimension)
        radii = np.asarray(radii, dtype=float).reshape(-1)
        centers = wrap_points(centers, box_side)
        inclusions = tuple(
            Inclusion(center=tuple(float(c) for c in center), radius=float(radius))
            for center, radius in zip(centers, radii)
        )
        return cls(inclusions=inclusions, box_side=float(box_side), dimension=dimension, separation=separation, **kwargs)

    def __len__(self) -> int:
        return len(self.inclusions)

    @property
    def centers(self) -> np.ndarray:
        if not self.inclusions:
            return np.zeros((0, self.dimension))
        return np.array([inclusion.center for inclusion in self.inclusions], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([inclusion.radius for inclusion in self.inclusions], dtype=float)

    def translated(self, shift) -> "InclusionSet":
        """Translate every center by shift and reduce modulo L"""
        if not self.inclusions:
            return self
        centers = wrap_points(self.centers + np.asarray(shift, dtype=float), self.box_side)
        inclusions = tuple(
            Inclusion(center=tuple(float(c) for c in center), radius=inclusion.radius)
            for center, inclusion in zip(centers, self.inclusions)
        )
        return replace(self, inclusions=inclusions)

    def with_inclusions(self, inclusions: Sequence[Inclusion], **parameter_updates) -> "InclusionSet":
        parameters = dict(self.parameters)
        parameters.update(parameter_updates)
        return replace(self, inclusions=tuple(inclusions), parameters=parameters)

    def to_document(self) -> Dict[str, Any]:
        """JSON document form; floats keep their shortest round-trip repr"""
        return {
            "dimension": self.dimension,
            "box_side": self.box_side,
            "separation": self.separation,
            "diameter_cap": self.diameter_cap,
            "seed": self.seed,
            "generator_tag": self.generator_tag.value,
            "parameters": self.parameters,
            "inclusions": [list(inclusion.center) + [inclusion.radius] for inclusion in self.inclusions],
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "InclusionSet":
        dimension = int(document["dimension"])
        rows = np.asarray(document["inclusions"], dtype=float).reshape(-1, dimension + 1)
        return cls.from_arrays(
            rows[:, :dimension],
            rows[:, dimension],
            box_side=float(document["box_side"]),
            dimension=dimension,
            separation=float(document["separation"]),
            diameter_cap=float(document["diameter_cap"]),
            seed=int(document["seed"]),
            generator_tag=GeneratorTag(document["generator_tag"]),
            parameters=dict(document.get("parameters", {})),
        )


@dataclass(frozen=True)
class AdmissibilityReport:
    diameter_ok: bool
    separation_ok: bool
    min_separation_ratio: float
    max_diameter: float
    matrix_connected_on_grid: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return self.diameter_ok and self.separation_ok


def _pair_ratios(centers: np.ndarray, radii: np.ndarray, pairs: np.ndarray, box_side: float) -> np.ndarray:
    j, k = pairs[:, 0], pairs[:, 1]
    distance = periodic_distance(centers[j], centers[k], box_side)
    gap = distance - radii[j] - radii[k]
    return gap / (2.0 * np.minimum(radii[j], radii[k]))


def min_separation_ratio(centers: np.ndarray, radii: np.ndarray, box_side: float) -> float:
    """Exact minimum over pairs of gap / min(diam_j, diam_k), +inf for fewer than two balls.

    A pair with ratio below rho has center distance below 2 r_max (1 + rho), so
    once one ratio is known a single neighbour query bounds the search.
    """
    if len(radii) < 2:
        return float("inf")
    dimension = centers.shape[1]
    tree = cKDTree(centers, boxsize=box_side)
    max_reach = 0.5 * box_side * np.sqrt(dimension)
    r_max = float(radii.max())
    cutoff = min(4.0 * r_max, max_reach)
    while True:
        pairs = tree.query_pairs(cutoff, output_type="ndarray")
        if len(pairs) > 0 or cutoff >= max_reach:
            break
        cutoff = min(2.0 * cutoff, max_reach)
    if len(pairs) == 0:
        return float("inf")
    best = float(_pair_ratios(centers, radii, pairs, box_side).min())
    needed = min(2.0 * r_max * (1.0 + best), max_reach)
    if needed > cutoff:
        pairs = tree.query_pairs(needed, output_type="ndarray")
        best = float(_pair_ratios(centers, radii, pairs, box_side).min())
    return best


def check_admissible(inclusion_set: InclusionSet, resolution: Optional[int] = None) -> AdmissibilityReport:
    """Diameter cap and pairwise separation status using periodic distance"""
    radii = inclusion_set.radii
    max_diameter = float(2.0 * radii.max()) if len(radii) else 0.0
    diameter_ok = bool(np.all(2.0 * radii < inclusion_set.diameter_cap))
    ratio = min_separation_ratio(inclusion_set.centers, radii, inclusion_set.box_side)
    separation_ok = bool(ratio > inclusion_set.separation)

    connected = None
    if resolution is not None:
        # Imported lazily: field depends on geometry
        from holehom.field import rasterize, matrix_components

        count, _, _ = matrix_components(rasterize(inclusion_set, resolution))
        connected = count == 1

    return AdmissibilityReport(
        diameter_ok=diameter_ok,
        separation_ok=separation_ok,
        min_separation_ratio=ratio,
        max_diameter=max_diameter,
        matrix_connected_on_grid=connected,
    )


def extension_domains(inclusion_set: InclusionSet) -> List[Tuple[int, Inclusion]]:
    """Concentric balls of radius (1 + rho/4) r_k, pairwise disjoint for admissible sets"""
    report = check_admissible(inclusion_set)
    if not report.ok:
        raise AdmissibilityError(
            f"Extension domains need an admissible set (diameter_ok={report.diameter_ok}, "
            f"min separation ratio {report.min_separation_ratio:.6g} vs {inclusion_set.separation})"
        )
    factor = 1.0 + inclusion_set.separation / 4.0
    domains = [
        (index, Inclusion(center=inclusion.center, radius=factor * inclusion.radius))
        for index, inclusion in enumerate(inclusion_set.inclusions)
    ]
    if len(domains) >= 2:
        centers = inclusion_set.centers
        radii = factor * inclusion_set.radii
        tree = cKDTree(centers, boxsize=inclusion_set.box_side)
        pairs = tree.query_pairs(2.0 * float(radii.max()), output_type="ndarray")
        if len(pairs):
            distance = periodic_distance(centers[pairs[:, 0]], centers[pairs[:, 1]], inclusion_set.box_side)
            if np.any(distance <= radii[pairs[:, 0]] + radii[pairs[:, 1]]):
                raise AdmissibilityError("Enlarged extension domains overlap for this separation constant")
    return domains


def meets_ball(inclusion_set: InclusionSet, center, radius: float) -> np.ndarray:
    """Mask of inclusions whose closure meets the open ball B_radius(center)"""
    if not len(inclusion_set):
        return np.zeros(0, dtype=bool)
    distance = periodic_distance(inclusion_set.centers, center, inclusion_set.box_side)
    return distance < radius + inclusion_set.radii


def inside_ball(inclusion_set: InclusionSet, center, radius: float) -> np.ndarray:
    """Mask of inclusions lying wholly inside B_radius(center)"""
    if not len(inclusion_set):
        return np.zeros(0, dtype=bool)
    distance = periodic_distance(inclusion_set.centers, center, inclusion_set.box_side)
    return distance + inclusion_set.radii < radius


def compatible_with(candidates: Sequence[Inclusion], kept: Sequence[Inclusion], box_side: float, separation: float) -> List[Inclusion]:
    """Candidates that keep the separation condition against every kept inclusion"""
    if not kept:
        return list(candidates)
    kept_centers = np.array([inclusion.center for inclusion in kept], dtype=float)
    kept_radii = np.array([inclusion.radius for inclusion in kept], dtype=float)
    accepted = []
    for candidate in candidates:
        distance = periodic_distance(kept_centers, candidate.center, box_side)
        gap = distance - kept_radii - candidate.radius
        ratio = gap / (2.0 * np.minimum(kept_radii, candidate.radius))
        if np.all(ratio > separation):
            accepted.append(candidate)
    return accepted
