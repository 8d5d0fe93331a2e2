import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from holehom.corrector import CorrectorBundle, compute_bundle, homogenized_estimate
from holehom.elliptic import MassiveOperator, SolverConfig, forward_gradient, solve_constant_coefficient
from holehom.ensemble import FIT_STREAM, PROFILE_STREAM, ConfidenceInterval, bootstrap, split, stream_seed
from holehom.errors import ConfigError, ScaleMismatch
from holehom.field import CoefficientField, Grid, GridField, MaskKind, matrix_components, rasterize
from holehom.io.config import RunConfig
from holehom.io.manifest import NoteCollector
from holehom.quantify import edge_chi, loglog_slope

logger = logging.getLogger(__name__)

DEFECT_COLUMNS = ("realization", "epsilon", "defect", "grad_g_norm", "cells_per_side", "matrix_fraction", "seed")


@dataclass(frozen=True)
class TrigForcing:
    """g_k(x) = amplitude sin(2 pi x_k) prod_{j != k} cos(2 pi x_j) on the unit torus"""

    amplitude: float = 1.0

    def component(self, k: int, points: np.ndarray) -> np.ndarray:
        value = self.amplitude * np.sin(2.0 * np.pi * points[k])
        for j in range(points.shape[0]):
            if j != k:
                value = value * np.cos(2.0 * np.pi * points[j])
        return value

    def edge_values(self, grid: Grid) -> np.ndarray:
        """g_k at the midpoint of every edge x -> x + e_k"""
        coordinates = grid.coordinates()
        values = []
        for k in range(grid.dimension):
            shifted = coordinates.copy()
            shifted[k] += 0.5 * grid.spacing
            values.append(self.component(k, shifted))
        return np.stack(values)

    def cell_values(self, grid: Grid) -> np.ndarray:
        coordinates = grid.coordinates()
        return np.stack([self.component(k, coordinates) for k in range(grid.dimension)])

    def gradient_norm(self, grid: Grid) -> float:
        """Discrete ||grad g||_2 over the torus"""
        values = self.cell_values(grid)
        squared = sum(np.sum(forward_gradient(component, grid.spacing) ** 2) for component in values)
        return float(np.sqrt(grid.cell_volume * squared))


def forcing_from_config(cfg: RunConfig) -> TrigForcing:
    twoscale = cfg.twoscale
    return TrigForcing(amplitude=0.0 if twoscale.forcing == "zero" else twoscale.amplitude)


def epsilon_field(cell_field: CoefficientField, epsilon: float) -> CoefficientField:
    """The cell tiled 1/epsilon times per axis onto the unit torus"""
    count = int(round(1.0 / epsilon))
    if not np.isclose(count * epsilon, 1.0):
        raise ValueError(f"1/epsilon must be an integer, got epsilon={epsilon}")
    return cell_field.tile(count)


def forcing_divergence(field: CoefficientField, edge_values: np.ndarray) -> np.ndarray:
    """h^d times the backward divergence of chi_M g on matrix edges"""
    grid = field.grid
    masked = edge_values * edge_chi(field)
    rhs = sum(masked[k] - np.roll(masked[k], 1, axis=k) for k in range(grid.dimension))
    return grid.spacing ** (grid.dimension - 1) * np.where(field.matrix_mask, rhs, 0.0)


def solve_eps_problem(field: CoefficientField,
                      forcing: TrigForcing,
                      T: float = 1e6,
                      cfg: Optional[SolverConfig] = None,
                      ) -> GridField:
    """u_eps solving -div(a grad u) = div(chi_M g) on the matrix

    A massive solve at large T stands in for the pure divergence-form problem;
    the result is shifted to zero mean on every matrix component.

    Raises:
        NonConvergence: propagated from the masked CG
    """
    rhs = forcing_divergence(field, forcing.edge_values(field.grid))
    u, stats = MassiveOperator(field, T).solve(rhs, cfg)
    logger.debug(f"eps-problem n={field.grid.cells_per_side}: {stats.iterations} iterations")
    data = np.array(u.data)
    _, _, labels = matrix_components(field)
    for label in np.unique(labels[labels > 0]):
        cells = labels == label
        data[cells] -= data[cells].mean()
    return GridField.scalar(field.grid, data, MaskKind.MATRIX_ONLY)


def solve_homogenized(forcing: TrigForcing, a_hom: np.ndarray, grid: Grid) -> np.ndarray:
    """u_hom solving -div(a_hom grad u) = div g with zero mean"""
    edge_values = forcing.edge_values(grid)
    rhs = sum(edge_values[k] - np.roll(edge_values[k], 1, axis=k) for k in range(grid.dimension)) / grid.spacing
    return solve_constant_coefficient(rhs, a_hom, grid)


def ball_average(u: np.ndarray, grid: Grid, radius: float) -> np.ndarray:
    """Discrete average of u over B_radius(x) at every cell, by FFT convolution"""
    kernel = grid.distance_from(np.full(grid.dimension, 0.5 * grid.spacing)) < radius
    kernel = kernel / kernel.sum()
    return np.fft.ifftn(np.fft.fftn(u) * np.fft.fftn(kernel)).real


def centered_gradient(u: np.ndarray, h: float) -> np.ndarray:
    return np.stack([(np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * h) for axis in range(u.ndim)])


def check_scale(bundle: CorrectorBundle, field: CoefficientField, epsilon: float):
    """The epsilon-field must be the bundle's microstructure tiled 1/epsilon times"""
    count = int(round(1.0 / epsilon))
    cell = bundle.grid
    if field.grid.cells_per_side != cell.cells_per_side * count or field.tile_count != count:
        raise ScaleMismatch(
            f"Bundle with n={cell.cells_per_side} does not match an epsilon-field with "
            f"n={field.grid.cells_per_side} at epsilon={epsilon}"
        )
    reps = (count,) * cell.dimension
    if not np.array_equal(np.tile(bundle.field.matrix_mask, reps), field.matrix_mask):
        raise ScaleMismatch(f"Bundle microstructure differs from the epsilon-field at epsilon={epsilon}")


def two_scale_defect(u_eps: GridField,
                     u_hom: np.ndarray,
                     bundle: CorrectorBundle,
                     epsilon: float,
                     field: CoefficientField,
                     ) -> float:
    """||chi_M grad z_eps||_2 with z_eps = u_eps - (U + s phi_i(./s) d_i U) on the matrix

    U is u_hom averaged over balls of radius epsilon and s = epsilon / L maps
    the cell of side L onto a tile of side epsilon.

    Raises:
        ScaleMismatch: bundle and field describe different microstructures
    """
    check_scale(bundle, field, epsilon)
    grid = field.grid
    count = field.tile_count
    scale = epsilon / bundle.grid.box_side
    U = ball_average(np.asarray(u_hom, dtype=float), grid, epsilon)
    dU = centered_gradient(U, grid.spacing)
    reps = (count,) * grid.dimension
    expansion = U + scale * sum(np.tile(entry.phi.data, reps) * dU[i] for i, entry in enumerate(bundle.directions))
    z = np.where(field.matrix_mask, u_eps.data - expansion, 0.0)
    gradient = forward_gradient(z, grid.spacing) * edge_chi(field)
    return float(np.sqrt(grid.cell_volume * np.sum(gradient ** 2)))


@dataclass(frozen=True)
class DefectRow:
    realization: int
    epsilon: float
    defect: float
    grad_g_norm: float
    cells_per_side: int
    matrix_fraction: float
    seed: int

    def to_row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TwoScaleTask:
    realization: int
    epsilon: float
    seed: int
    config: RunConfig


def cell_resolution(cfg: RunConfig) -> Tuple[float, int]:
    """(side, cells per side) of the sampled microstructure cell

    Explicit geometries keep their own box; sampled ones use twoscale.cell_side.

    Raises:
        ConfigError: the resolution is not a power of two >= 8, or a lattice
            cell side is not an integer
    """
    if cfg.geometry.generator == "Explicit":
        side = cfg.geometry.box_side
    else:
        side = cfg.twoscale.cell_side
        if cfg.geometry.generator == "LatticeIID" and side != int(side):
            raise ConfigError(f"LatticeIID needs an integer twoscale.cell_side, got {side}")
    try:
        return side, cfg.twoscale.cell_resolution(side)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def cell_bundle(cfg: RunConfig, seed: int) -> CorrectorBundle:
    """Corrector bundle on the microstructure cell at T = L^2

    Raises:
        ConfigError: the resolution is invalid or resolves none of the sampled inclusions
    """
    side, n = cell_resolution(cfg)
    inclusion_set = cfg.geometry.sample(seed=seed, box_side=None if cfg.geometry.generator == "Explicit" else side)
    profile = cfg.field.profile.to_profile(seed=stream_seed(seed, PROFILE_STREAM))
    field = rasterize(inclusion_set, n, profile)
    if len(inclusion_set) and field.matrix_fraction == 1.0:
        raise ConfigError(f"n={n} on the cell of side {side:g} resolves none of its {len(inclusion_set)} inclusions")
    T = cfg.corrector.resolve_T(inclusion_set.box_side)
    logger.info(f"Two-scale expansion uses phi_T at T = L^2 = {T:.4g} of the microstructure cell")
    return compute_bundle(field, T, cfg.solver.to_solver(), with_sigma=False, with_aux=False)


def run_task(task: TwoScaleTask) -> Tuple[DefectRow, List[str]]:
    cfg = task.config
    with NoteCollector() as collector:
        bundle = cell_bundle(cfg, task.seed)
        a_hom = homogenized_estimate(bundle, task.seed).symmetric_part()
        forcing = forcing_from_config(cfg)
        field = epsilon_field(bundle.field, task.epsilon)
        u_eps = solve_eps_problem(field, forcing, cfg.twoscale.T_eps, cfg.solver.to_solver())
        u_hom = solve_homogenized(forcing, a_hom, field.grid)
        defect = two_scale_defect(u_eps, u_hom, bundle, task.epsilon, field)
    row = DefectRow(
        realization=task.realization,
        epsilon=float(task.epsilon),
        defect=defect,
        grad_g_norm=forcing.gradient_norm(field.grid),
        cells_per_side=field.grid.cells_per_side,
        matrix_fraction=field.matrix_fraction,
        seed=task.seed,
    )
    logger.info(f"Realization {task.realization}, epsilon={task.epsilon}: defect {defect:.4e}")
    return row, collector.notes


def build_tasks(cfg: RunConfig) -> List[TwoScaleTask]:
    master = cfg.ensemble.master_seed
    return [
        TwoScaleTask(realization=r, epsilon=eps, seed=split(master, r), config=cfg)
        for r in range(cfg.twoscale.realizations)
        for eps in cfg.twoscale.epsilon_list
    ]


@dataclass(frozen=True)
class RateFit:
    rate: float
    interval: ConfidenceInterval
    model: str
    power_residual: float
    log_corrected_residual: float
    log_corrected_constant: float
    per_realization: Tuple[float, ...]
    monotone_median: bool

    def to_dict(self) -> dict:
        data = asdict(self)
        data["interval"] = self.interval.to_dict()
        data["per_realization"] = list(self.per_realization)
        return data


def _log_corrected(epsilons: np.ndarray, defects: np.ndarray) -> Tuple[float, float]:
    """Best constant c in log d = log c + log(eps ln(2 + 1/eps)) and the log-space residual"""
    shape = np.log(epsilons * np.log(2.0 + 1.0 / epsilons))
    log_c = float(np.mean(np.log(defects) - shape))
    residual = float(np.sum((np.log(defects) - shape - log_c) ** 2))
    return float(np.exp(log_c)), residual


def rate_fit(rows: Sequence[DefectRow], resamples: int = 1000, seed: int = 0) -> RateFit:
    """Log-log slope of the defect against epsilon, per realization and pooled

    The median defect per epsilon decides between the power law and the
    log-corrected model c eps ln(2 + 1/eps); ties go to the power law. The
    interval bootstraps the mean of the per-realization slopes.
    """
    epsilons = sorted({row.epsilon for row in rows})
    if len(epsilons) < 3:
        raise ValueError(f"Rate fit needs at least three epsilon values, got {len(epsilons)}")
    by_realization: Dict[int, Dict[float, float]] = {}
    for row in rows:
        by_realization.setdefault(row.realization, {})[row.epsilon] = row.defect
    slopes = []
    for realization in sorted(by_realization):
        points = by_realization[realization]
        x = [eps for eps in epsilons if points.get(eps, 0.0) > 0]
        if len(x) >= 2:
            slopes.append(loglog_slope(x, [points[eps] for eps in x]).slope)
    if not slopes:
        raise ValueError("Rate fit needs positive defects")

    medians = np.array([np.median([points[eps] for points in by_realization.values() if eps in points]) for eps in epsilons])
    eps_array = np.asarray(epsilons, dtype=float)
    power = loglog_slope(eps_array, medians)
    constant, log_residual = _log_corrected(eps_array, medians)
    model = "log_corrected" if log_residual < power.residual else "power"
    # epsilons ascend here; the defect should shrink with epsilon
    monotone = bool(np.all(np.diff(medians) >= 0))
    interval = bootstrap(slopes, np.mean, resamples, seed=seed)
    return RateFit(
        rate=float(np.mean(slopes)),
        interval=interval,
        model=model,
        power_residual=power.residual,
        log_corrected_residual=log_residual,
        log_corrected_constant=constant,
        per_realization=tuple(float(s) for s in slopes),
        monotone_median=monotone,
    )


@dataclass
class TwoScaleReport:
    rows: List[DefectRow]
    fit: Optional[RateFit]
    wall_seconds: float
    notes: List[str]


async def run_twoscale_async(cfg: RunConfig, workers: int = 1) -> TwoScaleReport:
    start = time.perf_counter()
    side, n = cell_resolution(cfg)
    logger.info(f"Microstructure cell of side {side:g} at n={n}")
    tasks = build_tasks(cfg)
    logger.info(f"Two-scale experiment: {len(tasks)} (realization, epsilon) tasks on {workers} worker(s)")
    if workers > 1:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = await asyncio.gather(*(loop.run_in_executor(pool, run_task, task) for task in tasks))
    else:
        results = [run_task(task) for task in tasks]
    rows = sorted((row for row, _ in results), key=lambda row: (row.realization, -row.epsilon))
    notes: List[str] = []
    for _, task_notes in results:
        notes.extend(note for note in task_notes if note not in notes)

    fit = None
    if len(cfg.twoscale.epsilon_list) >= 3 and all(row.defect > 0 for row in rows):
        fit = rate_fit(rows, cfg.twoscale.bootstrap_resamples, stream_seed(cfg.ensemble.master_seed, FIT_STREAM))
    elif rows and all(row.defect == 0 for row in rows):
        logger.info("All two-scale defects vanish; no rate to fit")
    return TwoScaleReport(rows=rows, fit=fit, wall_seconds=time.perf_counter() - start, notes=notes)


def run_twoscale(cfg: RunConfig, workers: int = 1) -> TwoScaleReport:
    return asyncio.run(run_twoscale_async(cfg, workers))
