import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from holehom.errors import AdmissibilityError
from holehom.geometry.inclusions import (
    GeneratorTag,
    InclusionSet,
    compatible_with,
    inside_ball,
    meets_ball,
    periodic_distance,
)

logger = logging.getLogger(__name__)

POISSON_SEPARATION = 0.499


@dataclass(frozen=True)
class RadiusLaw:
    """Bounded radius law on [0, r_max]

    kind "uniform" draws from [low, high], "point" always returns value,
    "discrete" draws from values with the given weights.
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = 0.0
    value: float = 0.0
    values: Tuple[float, ...] = ()
    weights: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if not 0 <= self.low <= self.high:
                raise ValueError(f"Uniform radius law needs 0 <= low <= high, got [{self.low}, {self.high}]")
        elif self.kind == "point":
            if self.value < 0:
                raise ValueError(f"Point radius law needs a nonnegative value, got {self.value}")
        elif self.kind == "discrete":
            if not self.values or min(self.values) < 0:
                raise ValueError("Discrete radius law needs nonnegative values")
            if self.weights and len(self.weights) != len(self.values):
                raise ValueError("Discrete radius law weights must match values")
        else:
            raise ValueError(f"Unknown radius law: {self.kind}")

    @property
    def upper(self) -> float:
        if self.kind == "uniform":
            return self.high
        if self.kind == "point":
            return self.value
        return max(self.values)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size)
        if self.kind == "point":
            return np.full(size, self.value)
        weights = np.asarray(self.weights, dtype=float) if self.weights else None
        if weights is not None:
            weights = weights / weights.sum()
        return rng.choice(np.asarray(self.values, dtype=float), size=size, p=weights)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.low, "high": self.high}
        if self.kind == "point":
            return {"kind": "point", "value": self.value}
        return {"kind": "discrete", "values": list(self.values), "weights": list(self.weights)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RadiusLaw":
        data = dict(data)
        for key in ("values", "weights"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def radius_ceiling(diameter_cap: float) -> float:
    """Largest radius strictly below diameter_cap / 2"""
    return float(np.nextafter(diameter_cap / 2.0, 0.0))


class InclusionSampler(ABC):
    """Abstract inclusion sampler

    A concrete sampler draws centers and radii from a numpy Generator seeded
    with the sample seed; everything else (wrapping, provenance, the
    admissibility check on the way out) happens here.
    """

    generator_tag: GeneratorTag

    def __init__(self, box_side: float, dimension: int, diameter_cap: float = 0.5):
        if dimension not in (2, 3):
            raise ValueError(f"Dimension must be 2 or 3, got {dimension}")
        if not box_side > 0:
            raise ValueError(f"Box side must be positive, got {box_side}")
        if not 0 < diameter_cap <= 1:
            raise ValueError(f"Diameter cap must lie in (0, 1], got {diameter_cap}")
        self.box_side = float(box_side)
        self.dimension = dimension
        self.diameter_cap = float(diameter_cap)
        self.truncation: Optional[Dict[str, float]] = None

    @property
    @abstractmethod
    def separation(self) -> float:
        """Separation constant every output of this sampler satisfies"""
        raise NotImplementedError

    @abstractmethod
    def _draw(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Return (centers, radii) for one realization"""
        raise NotImplementedError

    @abstractmethod
    def parameters(self) -> Dict[str, Any]:
        """Constructor arguments, enough to rebuild the sampler"""
        raise NotImplementedError

    def _record_truncation(self, requested: float, ceiling: float):
        self.truncation = {"requested_radius": float(requested), "truncated_radius": float(ceiling)}
        logger.info(
            f"{self.generator_tag.value}: radius {requested} truncated to {ceiling} to respect diameter cap {self.diameter_cap}"
        )

    def sample(self, seed: int) -> InclusionSet:
        rng = np.random.default_rng(seed)
        centers, radii = self._draw(rng)
        keep = radii > 0
        parameters = self.parameters()
        if self.truncation is not None:
            parameters["truncation"] = dict(self.truncation)
        inclusion_set = InclusionSet.from_arrays(
            centers[keep],
            radii[keep],
            box_side=self.box_side,
            dimension=self.dimension,
            separation=self.separation,
            diameter_cap=self.diameter_cap,
            seed=int(seed),
            generator_tag=self.generator_tag,
            parameters=parameters,
        )
        logger.debug(f"{self.generator_tag.value} seed={seed}: {len(inclusion_set)} inclusions")
        return inclusion_set


class LatticeIIDSampler(InclusionSampler):
    """One ball per integer lattice site with i.i.d. radii"""

    generator_tag = GeneratorTag.LATTICE_IID

    def __init__(self,
                 box_side: int,
                 dimension: int,
                 radius_law: RadiusLaw,
                 diameter_cap: float = 0.5,
                 separation: Optional[float] = None,
                 truncate: bool = True,
                 ):
        """Initialize the lattice sampler

        Args:
            box_side: Integer torus side, one site per lattice point
            dimension: 2 or 3
            radius_law: Law of the i.i.d. radii
            diameter_cap: Strict upper bound on every diameter
            separation: Declared separation constant, derived from the spacing when omitted
            truncate: Truncate radii above the cap instead of rejecting the law
        """
        if int(box_side) != box_side or box_side < 1:
            raise ValueError(f"Lattice sampler needs a positive integer box side, got {box_side}")
        super().__init__(int(box_side), dimension, diameter_cap)
        self.radius_law = radius_law
        self.truncate = truncate

        ceiling = radius_ceiling(self.diameter_cap)
        r_max = radius_law.upper
        if r_max >= self.diameter_cap / 2.0:
            if not truncate:
                raise AdmissibilityError(
                    f"Radius law upper bound {r_max} violates diameter cap {self.diameter_cap}"
                )
            self._record_truncation(r_max, ceiling)
            r_max = ceiling
        self.r_max = r_max

        # Neighbouring sites are one unit apart, so the worst gap is 1 - 2 r_max
        limit = (1.0 - 2.0 * r_max) / (2.0 * r_max) if r_max > 0 else float("inf")
        if separation is None:
            self._separation = 0.9 * limit if np.isfinite(limit) else 1.0
        else:
            if not separation < limit:
                raise AdmissibilityError(
                    f"Lattice separation {separation} not achievable with r_max={r_max} (limit {limit:.6g})"
                )
            self._separation = float(separation)
        self._explicit_separation = separation

    @property
    def separation(self) -> float:
        return self._separation

    def parameters(self) -> Dict[str, Any]:
        return {
            "box_side": int(self.box_side),
            "dimension": self.dimension,
            "radius_law": self.radius_law.to_dict(),
            "diameter_cap": self.diameter_cap,
            "separation": self._explicit_separation,
            "truncate": self.truncate,
        }

    def _draw(self, rng):
        side = int(self.box_side)
        sites = np.indices((side,) * self.dimension).reshape(self.dimension, -1).T.astype(float)
        radii = np.minimum(self.radius_law.sample(rng, len(sites)), self.r_max)
        return sites, radii


def hardcore_radii(points: np.ndarray, box_side: float, radius_cap: float, ceiling: float = np.inf) -> np.ndarray:
    """r_k = min(R, nearest neighbour distance / 3), further capped by ceiling"""
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return np.zeros(0)
    if len(points) == 1:
        # The only neighbour is the point's own periodic image
        nearest = np.array([box_side])
    else:
        distances, _ = cKDTree(points, boxsize=box_side).query(points, k=2)
        nearest = distances[:, 1]
    return np.minimum(np.minimum(radius_cap, nearest / 3.0), ceiling)


def hardcore_inclusions(points, box_side: float, radius_cap: float, diameter_cap: float = 0.5, seed: int = 0) -> InclusionSet:
    """Apply the hard-core radius rule to given points"""
    points = np.asarray(points, dtype=float)
    dimension = points.shape[1]
    wrapped = np.mod(points, box_side)
    wrapped[wrapped >= box_side] = 0.0
    radii = hardcore_radii(wrapped, box_side, radius_cap, radius_ceiling(diameter_cap))
    return InclusionSet.from_arrays(
        wrapped,
        radii,
        box_side=box_side,
        dimension=dimension,
        separation=POISSON_SEPARATION,
        diameter_cap=diameter_cap,
        seed=seed,
        generator_tag=GeneratorTag.POISSON_HARDCORE,
        parameters={"radius_cap": radius_cap, "forced_points": True},
    )


class PoissonHardcoreSampler(InclusionSampler):
    """Poisson points with radius min(R, one third of the nearest neighbour distance)"""

    generator_tag = GeneratorTag.POISSON_HARDCORE

    def __init__(self,
                 box_side: float,
                 dimension: int,
                 intensity: float,
                 radius_cap: float,
                 diameter_cap: float = 0.5,
                 point_budget: int = 1_000_000,
                 ):
        super().__init__(box_side, dimension, diameter_cap)
        if not intensity > 0:
            raise ValueError(f"Intensity must be positive, got {intensity}")
        if not radius_cap > 0:
            raise ValueError(f"Radius cap must be positive, got {radius_cap}")
        self.intensity = float(intensity)
        self.radius_cap = float(radius_cap)
        self.point_budget = int(point_budget)
        self.expected_count = self.intensity * self.box_side ** dimension
        if self.expected_count > self.point_budget:
            raise ValueError(
                f"Point budget exceeded: expected {self.expected_count:.6g} points, budget {self.point_budget}"
            )
        ceiling = radius_ceiling(self.diameter_cap)
        if self.radius_cap > ceiling:
            self._record_truncation(self.radius_cap, ceiling)
        self.ceiling = ceiling

    @property
    def separation(self) -> float:
        return POISSON_SEPARATION

    def parameters(self) -> Dict[str, Any]:
        return {
            "box_side": self.box_side,
            "dimension": self.dimension,
            "intensity": self.intensity,
            "radius_cap": self.radius_cap,
            "diameter_cap": self.diameter_cap,
            "point_budget": self.point_budget,
        }

    def _draw(self, rng):
        count = int(rng.poisson(self.expected_count))
        if count > self.point_budget:
            raise ValueError(f"Point budget exceeded: drew {count} points, budget {self.point_budget}")
        points = rng.uniform(0.0, self.box_side, size=(count, self.dimension))
        return points, hardcore_radii(points, self.box_side, self.radius_cap, self.ceiling)


class RandomParkingSampler(InclusionSampler):
    """Random sequential adsorption with exclusion radius R and holes of radius R/2"""

    generator_tag = GeneratorTag.RANDOM_PARKING

    def __init__(self,
                 box_side: float,
                 dimension: int,
                 exclusion_radius: float,
                 diameter_cap: float = 0.5,
                 slack: Optional[float] = None,
                 rejection_cap: Optional[int] = None,
                 batch_size: int = 4096,
                 ):
        """Initialize the parking sampler

        Args:
            exclusion_radius: Minimum distance R between accepted centers
            slack: Extra margin on top of R, default 0.01 R
            rejection_cap: Consecutive rejections before stopping, default 10^4 L^d
            batch_size: Candidates drawn per batch; part of the sampler's identity
        """
        super().__init__(box_side, dimension, diameter_cap)
        if not exclusion_radius > 0:
            raise ValueError(f"Exclusion radius must be positive, got {exclusion_radius}")
        self.exclusion_radius = float(exclusion_radius)
        self.slack = 0.01 * self.exclusion_radius if slack is None else float(slack)
        if self.slack <= 0:
            raise ValueError(f"Slack must be positive, got {self.slack}")
        if rejection_cap is None:
            rejection_cap = int(1e4 * self.box_side ** dimension)
        self.rejection_cap = int(rejection_cap)
        self.batch_size = int(batch_size)
        self._explicit_rejection_cap = rejection_cap

        ceiling = radius_ceiling(self.diameter_cap)
        radius = 0.5 * self.exclusion_radius
        if radius > ceiling:
            self._record_truncation(radius, ceiling)
            radius = ceiling
        self.radius = radius
        logger.info(f"Random parking saturation proxy: stop after {self.rejection_cap} consecutive rejections")

    @property
    def threshold(self) -> float:
        return self.exclusion_radius + self.slack

    @property
    def separation(self) -> float:
        # Accepted centers are at least R + slack apart
        return (self.threshold - 2.0 * self.radius) / (2.0 * self.radius) * (1.0 - 1e-9)

    def parameters(self) -> Dict[str, Any]:
        return {
            "box_side": self.box_side,
            "dimension": self.dimension,
            "exclusion_radius": self.exclusion_radius,
            "diameter_cap": self.diameter_cap,
            "slack": self.slack,
            "rejection_cap": self.rejection_cap,
            "batch_size": self.batch_size,
        }

    def _draw(self, rng):
        centers = random_sequential_adsorption(
            rng, self.box_side, self.dimension, self.threshold, self.rejection_cap, self.batch_size
        )
        return centers, np.full(len(centers), self.radius)


def random_sequential_adsorption(rng: np.random.Generator,
                                 box_side: float,
                                 dimension: int,
                                 threshold: float,
                                 rejection_cap: int,
                                 batch_size: int = 4096,
                                 ) -> np.ndarray:
    """Sequential acceptance of uniform candidates at distance >= threshold

    Candidates are drawn in fixed batches and prefiltered against a tree of
    the already accepted centers; survivors are then processed in draw order,
    so the result equals the one-candidate-at-a-time process on the same stream.
    """
    accepted = np.zeros((0, dimension))
    consecutive = 0
    tree = None
    while consecutive < rejection_cap:
        batch = rng.uniform(0.0, box_side, size=(batch_size, dimension))
        if tree is None:
            alive = np.ones(batch_size, dtype=bool)
        else:
            distance, _ = tree.query(batch, k=1)
            alive = distance >= threshold

        fresh = []
        position = 0
        stopped = False
        for index in np.flatnonzero(alive):
            consecutive += index - position
            if consecutive >= rejection_cap:
                stopped = True
                break
            position = index + 1
            candidate = batch[index]
            if fresh and np.min(periodic_distance(np.asarray(fresh), candidate, box_side)) < threshold:
                consecutive += 1
                if consecutive >= rejection_cap:
                    stopped = True
                    break
                continue
            fresh.append(candidate)
            consecutive = 0
        if not stopped:
            consecutive += batch_size - position

        if fresh:
            accepted = np.vstack([accepted, np.asarray(fresh)])
            tree = cKDTree(accepted, boxsize=box_side)
    return accepted


SAMPLERS = {
    GeneratorTag.LATTICE_IID: LatticeIIDSampler,
    GeneratorTag.POISSON_HARDCORE: PoissonHardcoreSampler,
    GeneratorTag.RANDOM_PARKING: RandomParkingSampler,
}


def build_sampler(tag, parameters: Dict[str, Any]) -> InclusionSampler:
    """Rebuild a sampler from its tag and the parameters stored on a set"""
    tag = GeneratorTag(tag)
    if tag not in SAMPLERS:
        raise ValueError(f"No sampler for generator tag {tag.value}")
    kwargs = {key: value for key, value in parameters.items() if key not in ("truncation", "resampled")}
    if tag is GeneratorTag.LATTICE_IID:
        kwargs["radius_law"] = RadiusLaw.from_dict(kwargs["radius_law"])
    return SAMPLERS[tag](**kwargs)


def sample_lattice_iid(box_side: int, dimension: int, radius_law: RadiusLaw, seed: int, **kwargs) -> InclusionSet:
    return LatticeIIDSampler(box_side, dimension, radius_law, **kwargs).sample(seed)


def sample_poisson_hardcore(box_side: float, dimension: int, intensity: float, radius_cap: float, seed: int, **kwargs) -> InclusionSet:
    return PoissonHardcoreSampler(box_side, dimension, intensity, radius_cap, **kwargs).sample(seed)


def sample_random_parking(box_side: float, dimension: int, exclusion_radius: float, seed: int, **kwargs) -> InclusionSet:
    return RandomParkingSampler(box_side, dimension, exclusion_radius, **kwargs).sample(seed)


def resample_outside(inclusion_set: InclusionSet, sampler: InclusionSampler, center: Sequence[float], radius: float, seed: int) -> InclusionSet:
    """Keep inclusions meeting B_radius(center), redraw everything else from seed

    Redrawn inclusions that would break the separation condition against a
    kept one are dropped. For radius >= L/2 the ball covers the torus and the
    set is returned unchanged.
    """
    if radius >= 0.5 * inclusion_set.box_side:
        return inclusion_set
    fresh = sampler.sample(seed)
    kept = [inc for inc, hit in zip(inclusion_set.inclusions, meets_ball(inclusion_set, center, radius)) if hit]
    candidates = [inc for inc, hit in zip(fresh.inclusions, meets_ball(fresh, center, radius)) if not hit]
    added = compatible_with(candidates, kept, inclusion_set.box_side, inclusion_set.separation)
    return inclusion_set.with_inclusions(
        kept + added,
        resampled={"mode": "outside", "center": [float(c) for c in center], "radius": float(radius), "seed": int(seed)},
    )


def resample_inside(inclusion_set: InclusionSet, sampler: InclusionSampler, center: Sequence[float], radius: float, seed: int) -> InclusionSet:
    """Replace the inclusions lying wholly inside B_radius(center) by those of a fresh draw

    Inclusions touching the sphere stay untouched. Resampling with the set's
    own seed returns an identical set.
    """
    fresh = sampler.sample(seed)
    kept = [inc for inc, inside in zip(inclusion_set.inclusions, inside_ball(inclusion_set, center, radius)) if not inside]
    candidates = [inc for inc, inside in zip(fresh.inclusions, inside_ball(fresh, center, radius)) if inside]
    added = compatible_with(candidates, kept, inclusion_set.box_side, inclusion_set.separation)
    if len(added) < len(candidates):
        logger.debug(f"resample_inside dropped {len(candidates) - len(added)} incompatible inclusions")
    return inclusion_set.with_inclusions(
        kept + added,
        resampled={"mode": "inside", "center": [float(c) for c in center], "radius": float(radius), "seed": int(seed)},
    )
