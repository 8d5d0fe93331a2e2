import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from holehom.corrector import CorrectorBundle, compute_bundle
from holehom.elliptic import MassiveOperator, SolverConfig, divergence_rhs, forward_difference, forward_gradient
from holehom.errors import SingularGram
from holehom.field import CoefficientField, GridField, matrix_components, rasterize
from holehom.geometry import InclusionSampler, build_sampler, resample_inside, resample_outside
from holehom.quantify.balls import ball_mask, dyadic_radii, edge_chi, fint, matrix_point, origin, quartic_bump
from holehom.quantify.energy import weighted_energy
from holehom.quantify.excess import ExcessResult, excess, nondegeneracy_bounds
from holehom.quantify.fits import loglog_slope

logger = logging.getLogger(__name__)

HARMONIC_T_FACTOR = 1e6
EXACT_MEMBER_LEVEL = 1e-9


def a_harmonic_function(field: CoefficientField,
                        seed: int,
                        cfg: Optional[SolverConfig] = None,
                        center: Optional[Sequence[float]] = None,
                        ) -> Tuple[GridField, np.ndarray]:
    """A function a-harmonic on B_{3L/8}, forced by div(a xi) on the annulus B_{L/2} minus B_{3L/8}

    xi is a random unit vector drawn from seed. The massive system is solved
    at T = 1e6 L^2 with the forcing balanced on every matrix component.
    """
    grid = field.grid
    L = grid.box_side
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(grid.dimension)
    xi /= np.linalg.norm(xi)
    logger.info("a-harmonic test function: annulus forcing stands in for a Lipschitz boundary layer")

    distance = grid.distance_from(origin(grid) if center is None else center)
    annulus = (distance >= 0.375 * L) & (distance < 0.5 * L) & field.matrix_mask
    rhs = np.where(annulus, divergence_rhs(field, xi), 0.0)
    _, _, labels = matrix_components(field)
    for label in np.unique(labels[annulus]):
        cells = annulus & (labels == label)
        rhs[cells] -= rhs[cells].mean()

    u, _ = MassiveOperator(field, HARMONIC_T_FACTOR * L ** 2).solve(rhs, cfg)
    return u, xi


def masked_gradient(u: GridField, field: CoefficientField) -> np.ndarray:
    return forward_gradient(u.data, field.grid.spacing) * edge_chi(field)


def _probe_radii(field: CoefficientField, rstar: Optional[float]) -> List[float]:
    grid = field.grid
    smallest = 2.0 * grid.spacing
    if rstar is not None and np.isfinite(rstar):
        smallest = max(smallest, rstar)
    radii = dyadic_radii(grid, smallest=smallest, largest=0.375 * grid.box_side)
    if len(radii) < 2:
        raise ValueError(f"Fewer than two dyadic radii between {smallest:.4g} and 3L/8")
    return radii


@dataclass(frozen=True)
class MeanValueResult:
    rows: Tuple[Tuple[float, float], ...]
    max_ratio: float
    nondegeneracy_constant: float


def mean_value_ratios(grad_u: np.ndarray,
                      field: CoefficientField,
                      radii: Sequence[float],
                      center: Optional[Sequence[float]] = None,
                      ) -> List[Tuple[float, float]]:
    """(r, fint_{B_r} chi |grad u|^2 / fint_{B_R} chi |grad u|^2) with R the largest radius"""
    grid = field.grid
    density = np.sum(grad_u ** 2, axis=0)
    outer = float(fint(density, ball_mask(grid, center, radii[-1])))
    if outer == 0.0:
        raise ValueError("grad u vanishes on the outer ball")
    return [(float(r), float(fint(density, ball_mask(grid, center, r))) / outer) for r in radii]


def mean_value_check(field: CoefficientField,
                     bundle: CorrectorBundle,
                     seed: int,
                     rstar: Optional[float] = None,
                     cfg: Optional[SolverConfig] = None,
                     center: Optional[Sequence[float]] = None,
                     ) -> MeanValueResult:
    center = probe_center(field, seed, center)
    u, _ = a_harmonic_function(field, seed, cfg, center)
    radii = _probe_radii(field, rstar)
    rows = mean_value_ratios(masked_gradient(u, field), field, radii, center)
    _, _, constant = nondegeneracy_bounds(bundle, radii[-1], center)
    return MeanValueResult(rows=tuple(rows), max_ratio=max(ratio for _, ratio in rows), nondegeneracy_constant=constant)


def probe_center(field: CoefficientField, seed: int, center: Optional[Sequence[float]] = None) -> np.ndarray:
    """The given center, or a matrix cell drawn from the probe seed"""
    if center is not None:
        return np.asarray(center, dtype=float)
    return matrix_point(field, seed)


@dataclass(frozen=True)
class ExcessDecayResult:
    rows: Tuple[Tuple[float, ExcessResult], ...]
    slope: Optional[float]
    exact_member: bool
    center: Tuple[float, ...] = ()
    slope_floor: Optional[float] = None

    @property
    def meets_floor(self) -> Optional[bool]:
        if self.slope is None or self.slope_floor is None:
            return None
        return self.slope >= self.slope_floor


def fit_excess_slope(rows: Sequence[Tuple[float, ExcessResult]], rstar: Optional[float] = None) -> Tuple[Optional[float], bool]:
    """Log-log slope of Exc(B_r) over r >= rstar; (None, True) when every excess is negligible"""
    if all(result.value <= EXACT_MEMBER_LEVEL for _, result in rows):
        return None, True
    floor = rstar if rstar is not None and np.isfinite(rstar) else 0.0
    points = [(r, result.value) for r, result in rows if r >= floor and result.value > 0]
    if len(points) < 2:
        return None, False
    fit = loglog_slope([r for r, _ in points], [value for _, value in points])
    return fit.slope, False


def excess_decay_profile(field: CoefficientField,
                         bundle: CorrectorBundle,
                         seed: int,
                         rstar: Optional[float] = None,
                         cfg: Optional[SolverConfig] = None,
                         center: Optional[Sequence[float]] = None,
                         slope_floor: Optional[float] = None,
                         ) -> ExcessDecayResult:
    """Excess of an a-harmonic function at dyadic radii and its decay slope

    Without an explicit center the balls are centered on a matrix cell drawn
    from seed. Leading radii whose Gram matrix is singular are skipped.

    Raises:
        SingularGram: fewer than two radii carry a nonsingular Gram matrix
    """
    center = probe_center(field, seed, center)
    u, _ = a_harmonic_function(field, seed, cfg, center)
    radii = dyadic_radii(field.grid, largest=0.375 * field.grid.box_side)
    rows = nondegenerate_excess_rows(masked_gradient(u, field), bundle, radii, center)
    slope, exact = fit_excess_slope(rows, rstar)
    return ExcessDecayResult(
        rows=tuple(rows),
        slope=slope,
        exact_member=exact,
        center=tuple(float(c) for c in center),
        slope_floor=slope_floor,
    )


def nondegenerate_excess_rows(grad_u: np.ndarray,
                              bundle: CorrectorBundle,
                              radii: Sequence[float],
                              center: Sequence[float],
                              ) -> List[Tuple[float, ExcessResult]]:
    """Excess per radius, starting at the first ball whose Gram matrix is nonsingular"""
    rows: List[Tuple[float, ExcessResult]] = []
    last_error: Optional[SingularGram] = None
    for r in radii:
        try:
            rows.append((float(r), excess(grad_u, bundle, r, center)))
        except SingularGram as e:
            if rows:
                raise
            logger.debug(f"Skipping B_{r:.4g}: {e}")
            last_error = e
    if len(rows) < 2:
        if last_error is not None:
            raise last_error
        raise SingularGram(f"Fewer than two excess radii around {tuple(center)}", float("inf"))
    return rows


@dataclass(frozen=True)
class LocalityResult:
    rows: Tuple[Tuple[float, float], ...]
    decay_rate: Optional[float]


def locality_probe(field: CoefficientField,
                   bundle: CorrectorBundle,
                   R_list: Sequence[float],
                   seed: int,
                   sampler: Optional[InclusionSampler] = None,
                   kappa: float = 1.0,
                   cfg: Optional[SolverConfig] = None,
                   center: Optional[Sequence[float]] = None,
                   ) -> LocalityResult:
    """|F_T(a1) - F_T(a2)| after resampling the geometry outside B_R, per R"""
    inclusion_set = field.inclusion_set
    if inclusion_set is None:
        raise ValueError("Locality probe needs a field rasterized from an inclusion set")
    sampler = sampler or build_sampler(inclusion_set.generator_tag, inclusion_set.parameters)
    center = origin(field.grid) if center is None else np.asarray(center, dtype=float)
    base = weighted_energy(bundle, kappa, center).value

    rows = []
    for R in sorted(R_list):
        modified = resample_outside(inclusion_set, sampler, center, R, seed)
        if modified is inclusion_set:
            rows.append((float(R), 0.0))
            continue
        other = rasterize(modified, field.grid.cells_per_side, field.profile)
        other_bundle = compute_bundle(other, bundle.T, cfg, with_sigma=False)
        rows.append((float(R), abs(weighted_energy(other_bundle, kappa, center).value - base)))

    positive = [(R, gap) for R, gap in rows if gap > 0]
    rate = None
    if len(positive) >= 2:
        scaled = np.array([R for R, _ in positive]) / np.sqrt(bundle.T)
        slope, _ = np.polyfit(scaled, np.log([gap for _, gap in positive]), 1)
        rate = float(-slope)
    return LocalityResult(rows=tuple(rows), decay_rate=rate)


def averaged_gradient(bundle: CorrectorBundle, bump: np.ndarray, direction: int = 0, component: int = 0) -> float:
    """F = int g . grad phi_ext with g = bump e_component"""
    grid = bundle.grid
    gradient = forward_difference(bundle.directions[direction].phi_ext.data, component, grid.spacing)
    return grid.cell_volume * float(np.sum(bump * gradient))


def oscillation_probe(field: CoefficientField,
                      bundle: CorrectorBundle,
                      x: Sequence[float],
                      r: float,
                      M: float,
                      seed: int,
                      sampler: Optional[InclusionSampler] = None,
                      cfg: Optional[SolverConfig] = None,
                      direction: int = 0,
                      component: int = 0,
                      ) -> float:
    """|Delta F| when the inclusions lying wholly inside B_M(x) are redrawn"""
    inclusion_set = field.inclusion_set
    if inclusion_set is None:
        raise ValueError("Oscillation probe needs a field rasterized from an inclusion set")
    sampler = sampler or build_sampler(inclusion_set.generator_tag, inclusion_set.parameters)
    modified = resample_inside(inclusion_set, sampler, x, M, seed)
    if set(modified.inclusions) == set(inclusion_set.inclusions):
        return 0.0
    bump = quartic_bump(field.grid, None, r)
    other = rasterize(modified, field.grid.cells_per_side, field.profile)
    other_bundle = compute_bundle(other, bundle.T, cfg, with_sigma=False, with_aux=False)
    return abs(averaged_gradient(other_bundle, bump, direction, component) - averaged_gradient(bundle, bump, direction, component))


def oscillation_scan(field: CoefficientField,
                     bundle: CorrectorBundle,
                     r: float,
                     M: float,
                     seed: int,
                     stride: float,
                     sampler: Optional[InclusionSampler] = None,
                     cfg: Optional[SolverConfig] = None,
                     ) -> List[Tuple[Tuple[float, ...], float, float]]:
    """Rows (x, |x|, |Delta F|) over a subgrid of probe points with the given stride"""
    grid = field.grid
    count = max(1, int(round(grid.box_side / stride)))
    axis = np.arange(count) * (grid.box_side / count)
    points = np.stack(np.meshgrid(*([axis] * grid.dimension), indexing="ij")).reshape(grid.dimension, -1).T
    rows = []
    for k, point in enumerate(points):
        delta = oscillation_probe(field, bundle, point, r, M, seed + k, sampler, cfg)
        wrapped = (point + 0.5 * grid.box_side) % grid.box_side - 0.5 * grid.box_side
        rows.append((tuple(float(c) for c in point), float(np.linalg.norm(wrapped)), delta))
    return rows


def oscillation_sum(rows: Sequence[Tuple[Tuple[float, ...], float, float]], stride: float) -> float:
    """Riemann sum of |Delta F|^2 over the probe subgrid"""
    if not rows:
        return 0.0
    dimension = len(rows[0][0])
    return float(sum(delta ** 2 for _, _, delta in rows) * stride ** dimension)


def oscillation_shape_fit(radii: Sequence[float], sums: Sequence[float], rstar: float, eps: float, dimension: int) -> Tuple[float, float]:
    """Least-squares C in sum(r) ~ C ((r + r*)^(1-eps) / r)^d, with the residual"""
    r = np.asarray(radii, dtype=float)
    y = np.asarray(sums, dtype=float)
    shape = ((r + rstar) ** (1.0 - eps) / r) ** dimension
    constant = float(np.dot(shape, y) / np.dot(shape, shape))
    residual = float(np.sum((y - constant * shape) ** 2))
    return constant, residual
