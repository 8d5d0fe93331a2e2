import logging

from holehom.commands.commands_registry import Command, CommandContext, CommandRegistry
from holehom.ensemble import EnsembleReport, decay_config, run_ensemble_async, variance_scaling_async

logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ("L", "n", "T", "column", "count", "mean", "var", "q05", "q50", "q95")


def record_report(context: CommandContext, report: EnsembleReport, with_aggregates: bool = True):
    """rows.csv, optional aggregates.csv and fits.json, with timing and notes in the manifest"""
    context.run.write_csv("rows.csv", report.columns, report.rows)
    if with_aggregates:
        context.run.write_csv("aggregates.csv", AGGREGATE_COLUMNS, report.aggregates)
    context.run.write_json("fits.json", {"failures": report.failures, "samples": len(report.rows), **report.fits})
    context.run.add_timing("wall_seconds", report.wall_seconds)
    context.run.add_timing("sample_seconds", report.sample_seconds)
    context.run.add_notes(report.notes)


class EnsembleCommands:
    """Commands running replicated samples under split seeds"""

    @staticmethod
    def register_all(registry: CommandRegistry):
        """Register all ensemble commands"""

        ensemble = Command(
            name="ensemble",
            description="Replicated samples over the schedule, or over T_list when given, with aggregates and fits",
            outputs=("rows.csv", "aggregates.csv", "fits.json"),
        )
        registry.register_command(ensemble, EnsembleCommands.ensemble)

        variance = Command(
            name="variance-scaling",
            description="Slope of log Var[A_L] against log L over at least three box sides",
            outputs=("rows.csv", "fits.json"),
        )
        registry.register_command(variance, EnsembleCommands.variance_scaling)

    @staticmethod
    async def ensemble(context: CommandContext):
        cfg = context.config
        if cfg.ensemble.T_list:
            logger.info(f"T_list given: sweeping T over {cfg.ensemble.T_list} at the first schedule entry")
            cfg = decay_config(cfg)
        report = await run_ensemble_async(cfg, context.workers)
        record_report(context, report)

    @staticmethod
    async def variance_scaling(context: CommandContext):
        report = await variance_scaling_async(context.config, workers=context.workers)
        fit = report.fits["variance_scaling"]
        logger.info(f"Variance slope {fit['slope']:.3f}")
        record_report(context, report, with_aggregates=False)
