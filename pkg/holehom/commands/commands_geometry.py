import logging
from typing import Tuple

from holehom.commands.commands_registry import Command, CommandContext, CommandRegistry
from holehom.field import CoefficientField, rasterize
from holehom.geometry import InclusionSet, check_admissible
from holehom.io import RunConfig, save_inclusions

logger = logging.getLogger(__name__)

ADMISSIBILITY_COLUMNS = (
    "inclusions",
    "diameter_ok",
    "separation_ok",
    "min_separation_ratio",
    "declared_separation",
    "max_diameter",
    "diameter_cap",
    "matrix_connected_on_grid",
    "cells_per_side",
)


def realize(cfg: RunConfig) -> Tuple[InclusionSet, CoefficientField]:
    """The configured geometry at geometry.seed, rasterized at the configured resolution"""
    inclusion_set = cfg.geometry.sample()
    field = rasterize(inclusion_set, cfg.field.resolution(inclusion_set.box_side), cfg.field.profile.to_profile())
    logger.info(f"{len(inclusion_set)} inclusions, matrix fraction {field.matrix_fraction:.4f}")
    return inclusion_set, field


class GeometryCommands:
    """Commands for sampling and checking inclusion geometries"""

    @staticmethod
    def register_all(registry: CommandRegistry):
        """Register all geometry commands"""

        sample_geometry = Command(
            name="sample-geometry",
            description="Sample an admissible inclusion set and report its admissibility",
            outputs=("inclusions.json", "admissibility.csv"),
        )
        registry.register_command(sample_geometry, GeometryCommands.sample_geometry)

    @staticmethod
    async def sample_geometry(context: CommandContext):
        cfg = context.config
        inclusion_set = cfg.geometry.sample()
        n = cfg.field.resolution(inclusion_set.box_side)
        report = check_admissible(inclusion_set, resolution=n)
        if report.matrix_connected_on_grid is False:
            logger.warning(f"Matrix is disconnected on the n={n} grid")

        path = context.run.path / "inclusions.json"
        save_inclusions(inclusion_set, path)
        context.run.record(path.name)
        context.run.write_csv("admissibility.csv", ADMISSIBILITY_COLUMNS, [{
            "inclusions": len(inclusion_set),
            "diameter_ok": report.diameter_ok,
            "separation_ok": report.separation_ok,
            "min_separation_ratio": report.min_separation_ratio,
            "declared_separation": inclusion_set.separation,
            "max_diameter": report.max_diameter,
            "diameter_cap": inclusion_set.diameter_cap,
            "matrix_connected_on_grid": report.matrix_connected_on_grid,
            "cells_per_side": n,
        }])
