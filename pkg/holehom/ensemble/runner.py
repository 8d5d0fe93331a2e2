import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from holehom.corrector import compute_bundle, homogenized_estimate
from holehom.elliptic import extension_bounds
from holehom.ensemble.seeds import EXTENSION_STREAM, FIT_STREAM, PROBE_STREAM, PROFILE_STREAM, split, stream_seed
from holehom.ensemble.stats import aggregate, fit_decay, fit_variance_scaling, rstar_tail_fit
from holehom.errors import (
    DegenerateVariance,
    FailureBudgetExceeded,
    NonConvergence,
    SingularGram,
    TooFewTailPoints,
)
from holehom.field import rasterize
from holehom.io.config import RunConfig, ScheduleEntry
from holehom.io.manifest import NoteCollector
from holehom.quantify import (
    caccioppoli_check,
    corrector_growth_profile,
    decay_quantity,
    excess_decay_profile,
    hole_filling_ratio,
    mean_value_check,
    regularity_radius,
)

logger = logging.getLogger(__name__)

BASE_COLUMNS = ("index", "sample", "L", "n", "T", "seed", "status", "error", "inclusions", "matrix_fraction", "cell_mean", "observable")
DIAGNOSTIC_COLUMNS = {
    "rstar": ("rstar",),
    "hole_filling": ("hole_filling_eps", "hole_filling_regime", "implied_gamma"),
    "decay": ("decay_quantity",),
    "excess_decay": ("excess_slope", "excess_exact"),
    "mean_value": ("mean_value_max_ratio", "nondegeneracy_C"),
    "growth": ("growth_model",),
    "caccioppoli": ("caccioppoli_ratio",),
    "extension": ("extension_value_norm", "extension_gradient_norm"),
}
NON_NUMERIC = ("status", "error", "hole_filling_regime", "growth_model", "excess_exact")
# Data-dependent failures of one sample; anything else aborts the ensemble
SAMPLE_FAILURES = (NonConvergence, SingularGram, ValueError, ArithmeticError, np.linalg.LinAlgError)
TAIL_CONSTANT_NOTE = "The constant of the exponential moment bound is not identifiable from finite samples; only the tail exponent is estimated."


def a_hom_columns(dimension: int) -> Tuple[str, ...]:
    return tuple(f"a_{j + 1}{i + 1}" for j in range(dimension) for i in range(dimension))


def row_columns(cfg: RunConfig) -> Tuple[str, ...]:
    """Fixed column order of rows.csv"""
    columns = BASE_COLUMNS + a_hom_columns(cfg.geometry.dimension)
    for name in DIAGNOSTIC_COLUMNS:
        if name in cfg.ensemble.diagnostics:
            columns += DIAGNOSTIC_COLUMNS[name]
    return columns


@dataclass(frozen=True)
class SampleTask:
    index: int
    sample: int
    entry: ScheduleEntry
    seed: int
    config: RunConfig

    @property
    def T(self) -> float:
        return self.entry.T if self.entry.T is not None else self.config.corrector.resolve_T(self.entry.L)


def _needs_bundle(cfg: RunConfig) -> bool:
    return cfg.ensemble.observable == "a11" or bool(set(cfg.ensemble.diagnostics) - {"extension"})


def _diagnostics(task: SampleTask, field, bundle) -> Dict[str, Any]:
    cfg = task.config
    q = cfg.quantify
    diagnostics = cfg.ensemble.diagnostics
    solver = cfg.solver.to_solver()
    probe_seed = stream_seed(task.seed, PROBE_STREAM)
    beta = cfg.ensemble.beta if cfg.ensemble.beta is not None else q.beta_value
    values: Dict[str, Any] = {}

    rstar = None
    if "rstar" in diagnostics:
        rstar = regularity_radius(bundle.phi_ext_stack(), bundle.sigma_stack(), field.grid, q.rstar_threshold_C, q.radii, q.center).value
        values["rstar"] = rstar
    if "hole_filling" in diagnostics:
        result = hole_filling_ratio(bundle, 0, q.center, beta)
        values.update(hole_filling_eps=result.eps_hat, hole_filling_regime=result.regime, implied_gamma=result.implied_gamma)
    if "decay" in diagnostics:
        values["decay_quantity"] = decay_quantity(bundle)
    if "excess_decay" in diagnostics:
        result = excess_decay_profile(field, bundle, probe_seed, rstar, solver, q.center, q.holder_alpha)
        values.update(excess_slope=result.slope, excess_exact=result.exact_member)
    if "mean_value" in diagnostics:
        result = mean_value_check(field, bundle, probe_seed, rstar, solver, q.center)
        values.update(mean_value_max_ratio=result.max_ratio, nondegeneracy_C=result.nondegeneracy_constant)
    if "growth" in diagnostics:
        _, fit = corrector_growth_profile(bundle.directions[0].phi_ext.data, field.grid, q.center)
        values["growth_model"] = fit.model
    if "caccioppoli" in diagnostics:
        R = q.caccioppoli_R if q.caccioppoli_R is not None else 0.25 * task.entry.L
        rho = q.caccioppoli_rho if q.caccioppoli_rho is not None else 0.5 * R
        values["caccioppoli_ratio"] = caccioppoli_check(bundle, 0, R, rho, q.center)
    return values


def run_sample(task: SampleTask) -> Tuple[Dict[str, Any], List[str], float]:
    """One ensemble sample: geometry, field, bundle and the requested diagnostics

    Solver and diagnostic failures are recorded in the row instead of raised.

    Returns:
        (row, notes logged while running, seconds)
    """
    cfg = task.config
    start = time.perf_counter()
    row: Dict[str, Any] = {
        "index": task.index,
        "sample": task.sample,
        "L": float(task.entry.L),
        "n": task.entry.n,
        "T": float(task.T),
        "seed": task.seed,
        "status": "ok",
    }
    with NoteCollector() as collector:
        inclusion_set = cfg.geometry.sample(seed=task.seed, box_side=task.entry.L if cfg.geometry.generator != "Explicit" else None)
        profile = cfg.field.profile.to_profile(seed=stream_seed(task.seed, PROFILE_STREAM))
        field_ = rasterize(inclusion_set, task.entry.n, profile)
        row.update(
            inclusions=len(inclusion_set),
            matrix_fraction=field_.matrix_fraction,
            cell_mean=float(field_.cell_value.mean()),
        )
        if cfg.ensemble.observable == "cell_mean":
            row["observable"] = row["cell_mean"]
        try:
            if "extension" in cfg.ensemble.diagnostics:
                bounds = extension_bounds(field_, cfg.ensemble.extension_samples, stream_seed(task.seed, EXTENSION_STREAM))
                row.update(extension_value_norm=bounds["value_norm"], extension_gradient_norm=bounds["gradient_norm"])
            if _needs_bundle(cfg):
                bundle = compute_bundle(
                    field_,
                    task.T,
                    cfg.solver.to_solver(),
                    with_sigma="rstar" in cfg.ensemble.diagnostics,
                    with_aux="decay" in cfg.ensemble.diagnostics,
                )
                estimate = homogenized_estimate(bundle, task.seed, cfg.corrector.symmetry_tolerance)
                row.update(zip(a_hom_columns(field_.grid.dimension), (float(v) for v in estimate.a_hom.ravel())))
                if cfg.ensemble.observable == "a11":
                    row["observable"] = float(estimate.a_hom[0, 0])
                row.update(_diagnostics(task, field_, bundle))
        except SAMPLE_FAILURES as e:
            logger.warning(f"Sample {task.index} (seed {task.seed}) failed: {type(e).__name__}: {e}")
            row.update(status="failed", error=f"{type(e).__name__}: {e}")
    return row, collector.notes, time.perf_counter() - start


@dataclass
class EnsembleReport:
    rows: List[Dict[str, Any]]
    columns: Tuple[str, ...]
    aggregates: List[Dict[str, Any]]
    fits: Dict[str, Any]
    failures: int
    wall_seconds: float
    sample_seconds: float
    notes: List[str] = field(default_factory=list)

    def ok_rows(self) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row["status"] == "ok"]


def build_tasks(cfg: RunConfig) -> List[SampleTask]:
    """Deterministic task list: schedule entry major, sample k uses split(master_seed, k)"""
    ensemble = cfg.ensemble
    seeds = [split(ensemble.master_seed, k) for k in range(ensemble.sample_count)]
    tasks = []
    for s, entry in enumerate(ensemble.schedule):
        for k, seed in enumerate(seeds):
            tasks.append(SampleTask(index=s * ensemble.sample_count + k, sample=k, entry=entry, seed=seed, config=cfg))
    return tasks


def _group_key(row: Dict[str, Any]) -> Tuple[float, int, float]:
    return row["L"], row["n"], row["T"]


def aggregate_rows(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> List[Dict[str, Any]]:
    """Per (L, n, T) and numeric column: count, mean, var, q05, q50, q95 over successful rows"""
    numeric = [c for c in columns if c not in BASE_COLUMNS[:8] and c not in NON_NUMERIC]
    groups: Dict[Tuple[float, int, float], List[Dict[str, Any]]] = {}
    for row in rows:
        if row["status"] == "ok":
            groups.setdefault(_group_key(row), []).append(row)
    aggregates = []
    for key in sorted(groups):
        for column in numeric:
            values = [row[column] for row in groups[key] if row.get(column) is not None]
            values = [v for v in values if np.isfinite(v)]
            if not values:
                continue
            L, n, T = key
            aggregates.append({"L": L, "n": n, "T": T, "column": column, **aggregate(values)})
    return aggregates


def _fits(cfg: RunConfig, rows: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    ensemble = cfg.ensemble
    seed = stream_seed(ensemble.master_seed, FIT_STREAM)
    ok = [row for row in rows if row["status"] == "ok"]
    fits: Dict[str, Any] = {}

    by_L: Dict[float, List[float]] = {}
    for row in ok:
        if row.get("observable") is not None:
            by_L.setdefault(row["L"], []).append(row["observable"])
    if len(by_L) >= 3:
        try:
            fits["variance_scaling"] = fit_variance_scaling(by_L, ensemble.bootstrap_resamples, seed).to_dict()
        except DegenerateVariance as e:
            fits["variance_scaling"] = {"error": str(e)}

    if "rstar" in ensemble.diagnostics:
        tail = {}
        for key in sorted({_group_key(row) for row in ok}):
            samples = [row["rstar"] for row in ok if _group_key(row) == key]
            label = f"L={key[0]},n={key[1]},T={key[2]}"
            try:
                tail[label] = rstar_tail_fit(
                    samples, ensemble.bootstrap_resamples, seed, min_samples=ensemble.tail_min_samples, exponent_floor=ensemble.tail_floor
                ).to_dict()
            except (ValueError, TooFewTailPoints) as e:
                tail[label] = {"error": str(e), "infinite_count": int(sum(not np.isfinite(s) for s in samples))}
        fits["rstar_tail"] = tail
        fits["rstar_tail_note"] = TAIL_CONSTANT_NOTE

    if "decay" in ensemble.diagnostics:
        by_T: Dict[float, List[float]] = {}
        for row in ok:
            by_T.setdefault(row["T"], []).append(row["decay_quantity"])
        if len(by_T) >= 3:
            try:
                fits["decay"] = fit_decay(by_T, ensemble.bootstrap_resamples, seed).to_dict()
            except DegenerateVariance as e:
                fits["decay"] = {"error": str(e)}

    if "hole_filling" in ensemble.diagnostics:
        eps = [row["hole_filling_eps"] for row in ok]
        if eps:
            fits["hole_filling"] = {
                "fraction_in_unit_interval": float(np.mean([0 < e <= 1 for e in eps])),
                "median_eps": float(np.median(eps)),
            }
    if "excess_decay" in ensemble.diagnostics:
        slopes = [row["excess_slope"] for row in ok if row.get("excess_slope") is not None]
        median = float(np.median(slopes)) if slopes else None
        fits["excess_decay"] = {
            "median_slope": median,
            "count": len(slopes),
            "slope_floor": cfg.quantify.holder_alpha,
            "meets_floor": None if median is None else median >= cfg.quantify.holder_alpha,
        }
    if "extension" in ensemble.diagnostics:
        fits["extension"] = extension_constants(ok)
    return fits


def extension_constants(rows: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Largest extension norm ratios per (L, n, T) group, to compare across resolutions"""
    constants = {}
    for key in sorted({_group_key(row) for row in rows}):
        group = [row for row in rows if _group_key(row) == key]
        constants[f"L={key[0]},n={key[1]},T={key[2]}"] = {
            "value_norm": float(max(row["extension_value_norm"] for row in group)),
            "gradient_norm": float(max(row["extension_gradient_norm"] for row in group)),
            "samples": len(group),
        }
    for label, entry in constants.items():
        logger.info(f"Extension constants at {label}: value {entry['value_norm']:.4g}, gradient {entry['gradient_norm']:.4g}")
    return constants


def _collect(cfg: RunConfig, results, start: float) -> EnsembleReport:
    results = sorted(results, key=lambda result: result[0]["index"])
    rows = [row for row, _, _ in results]
    notes: List[str] = []
    for _, sample_notes, _ in results:
        notes.extend(note for note in sample_notes if note not in notes)

    failures = sum(row["status"] != "ok" for row in rows)
    budget = cfg.ensemble.failure_budget
    if failures > budget * len(rows):
        raise FailureBudgetExceeded(
            f"{failures} of {len(rows)} samples failed, above the {budget:.0%} budget", failures, len(rows)
        )
    if failures:
        logger.warning(f"{failures} of {len(rows)} samples failed and are excluded")

    columns = row_columns(cfg)
    return EnsembleReport(
        rows=rows,
        columns=columns,
        aggregates=aggregate_rows(rows, columns),
        fits=_fits(cfg, rows),
        failures=failures,
        wall_seconds=time.perf_counter() - start,
        sample_seconds=float(sum(seconds for _, _, seconds in results)),
        notes=notes,
    )


async def run_ensemble_async(cfg: RunConfig, workers: int = 1) -> EnsembleReport:
    """Run every task on a process pool and aggregate in task order"""
    start = time.perf_counter()
    tasks = build_tasks(cfg)
    logger.info(f"Ensemble: {len(tasks)} samples on {workers} worker(s)")
    if workers > 1:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = await asyncio.gather(*(loop.run_in_executor(pool, run_sample, task) for task in tasks))
    else:
        results = [run_sample(task) for task in tasks]
    return _collect(cfg, results, start)


def run_ensemble(cfg: RunConfig, workers: int = 1) -> EnsembleReport:
    return asyncio.run(run_ensemble_async(cfg, workers))


def with_schedule(cfg: RunConfig, schedule: Sequence[ScheduleEntry], **ensemble_updates) -> RunConfig:
    ensemble = cfg.ensemble.model_copy(update={"schedule": list(schedule), **ensemble_updates})
    return cfg.model_copy(update={"ensemble": ensemble})


def variance_config(cfg: RunConfig, L_list: Optional[Sequence[float]] = None) -> RunConfig:
    """Schedule with one entry per L; n from the schedule or from field.cells_per_unit"""
    if L_list is None:
        schedule = cfg.ensemble.schedule
    else:
        schedule = [ScheduleEntry(L=L, n=cfg.field.resolution(L)) for L in L_list]
    if len({entry.L for entry in schedule}) < 3:
        raise ValueError("Variance scaling needs at least three values of L")
    if cfg.ensemble.sample_count < 100:
        raise ValueError(f"Variance scaling needs at least 100 samples per L, got {cfg.ensemble.sample_count}")
    return with_schedule(cfg, schedule)


async def variance_scaling_async(cfg: RunConfig, L_list: Optional[Sequence[float]] = None, workers: int = 1) -> EnsembleReport:
    report = await run_ensemble_async(variance_config(cfg, L_list), workers)
    if "variance_scaling" not in report.fits:
        raise ValueError("Variance scaling fit unavailable: fewer than three L with successful samples")
    if "error" in report.fits["variance_scaling"]:
        raise DegenerateVariance(report.fits["variance_scaling"]["error"])
    return report


def variance_scaling(cfg: RunConfig, L_list: Optional[Sequence[float]] = None, workers: int = 1) -> EnsembleReport:
    """Ensemble over L_list with the slope of log Var[A_L] against log L in fits["variance_scaling"]"""
    return asyncio.run(variance_scaling_async(cfg, L_list, workers))


def decay_config(cfg: RunConfig, T_list: Optional[Sequence[float]] = None) -> RunConfig:
    T_list = sorted(cfg.ensemble.T_list if T_list is None else T_list)
    if len(T_list) < 3:
        raise ValueError(f"T-decay fit needs at least three values of T, got {len(T_list)}")
    base = cfg.ensemble.schedule[0]
    schedule = [ScheduleEntry(L=base.L, n=base.n, T=T) for T in T_list]
    diagnostics = list(cfg.ensemble.diagnostics)
    if "decay" not in diagnostics:
        diagnostics.append("decay")
    return with_schedule(cfg, schedule, diagnostics=diagnostics, T_list=T_list)


def decay_fit_T(cfg: RunConfig, T_list: Optional[Sequence[float]] = None, workers: int = 1) -> EnsembleReport:
    """Ensemble over T_list at the first schedule entry with eps_hat in fits["decay"]"""
    return run_ensemble(decay_config(cfg, T_list), workers)
