import logging
import time
from typing import List, Optional

import numpy as np

from holehom.commands.commands_geometry import realize
from holehom.commands.commands_registry import Command, CommandContext, CommandRegistry
from holehom.corrector import CorrectorBundle, HomogenizedEstimate, compute_bundle, homogenized_estimate, voigt_bound
from holehom.io import dump_bundle

logger = logging.getLogger(__name__)

A_HOM_COLUMNS = ("row", "column", "value")
STATS_COLUMNS = ("direction", "op", "n", "T", "iterations", "residual")
HOMOGENIZED_COLUMNS = (
    "n",
    "T",
    "seed",
    "volume_fraction_matrix",
    "voigt_bound",
    "symmetry_defect",
    "max_residual",
    "min_eigenvalue",
    "max_eigenvalue",
)


def a_hom_rows(estimate: HomogenizedEstimate) -> List[dict]:
    d = estimate.a_hom.shape[0]
    return [{"row": j + 1, "column": i + 1, "value": float(estimate.a_hom[j, i])} for j in range(d) for i in range(d)]


def solve_bundle(context: CommandContext, with_sigma: Optional[bool] = None, with_aux: Optional[bool] = None) -> CorrectorBundle:
    """Bundle of the configured geometry; flags default to the corrector config"""
    cfg = context.config
    _, field = realize(cfg)
    started = time.perf_counter()
    bundle = compute_bundle(
        field,
        cfg.corrector.resolve_T(field.grid.box_side),
        cfg.solver.to_solver(),
        workers=context.workers,
        with_sigma=cfg.corrector.sigma if with_sigma is None else with_sigma,
        with_aux=cfg.corrector.aux if with_aux is None else with_aux,
    )
    context.run.add_timing("bundle_seconds", time.perf_counter() - started)
    context.run.add_notes(bundle.notes)
    if context.dump_field:
        for path in dump_bundle(context.run.path, field, bundle).values():
            context.run.record(path.name)
    return bundle


class CorrectorCommands:
    """Commands computing correctors and the homogenized coefficient"""

    @staticmethod
    def register_all(registry: CommandRegistry):
        """Register all corrector commands"""

        corrector = Command(
            name="corrector",
            description="Massive correctors, fluxes and flux corrector for one geometry",
            outputs=("a_hom.csv", "stats.csv"),
        )
        registry.register_command(corrector, CorrectorCommands.corrector)

        homogenize = Command(
            name="homogenize",
            description="Homogenized coefficient with volume fraction, Voigt bound and symmetry defect",
            outputs=("a_hom.csv", "homogenized.csv"),
        )
        registry.register_command(homogenize, CorrectorCommands.homogenize)

    @staticmethod
    async def corrector(context: CommandContext):
        cfg = context.config
        bundle = solve_bundle(context)
        estimate = homogenized_estimate(bundle, cfg.geometry.seed, cfg.corrector.symmetry_tolerance)
        context.run.write_csv("a_hom.csv", A_HOM_COLUMNS, a_hom_rows(estimate))
        rows = []
        for i, stats in enumerate(bundle.stats()):
            rows.append({"direction": i + 1, **stats.to_row()})
        context.run.write_csv("stats.csv", STATS_COLUMNS, rows)

    @staticmethod
    async def homogenize(context: CommandContext):
        cfg = context.config
        bundle = solve_bundle(context, with_sigma=False)
        estimate = homogenized_estimate(bundle, cfg.geometry.seed, cfg.corrector.symmetry_tolerance)
        eigenvalues = np.linalg.eigvalsh(estimate.symmetric_part())
        context.run.write_csv("a_hom.csv", A_HOM_COLUMNS, a_hom_rows(estimate))
        context.run.write_csv("homogenized.csv", HOMOGENIZED_COLUMNS, [{
            "n": estimate.n,
            "T": estimate.T,
            "seed": estimate.seed,
            "volume_fraction_matrix": estimate.volume_fraction_matrix,
            "voigt_bound": voigt_bound(bundle),
            "symmetry_defect": estimate.symmetry_defect,
            "max_residual": max(estimate.residuals),
            "min_eigenvalue": float(eigenvalues[0]),
            "max_eigenvalue": float(eigenvalues[-1]),
        }])
