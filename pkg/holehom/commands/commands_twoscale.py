import logging

from holehom.commands.commands_registry import Command, CommandContext, CommandRegistry
from holehom.twoscale import DEFECT_COLUMNS, cell_resolution, run_twoscale_async

logger = logging.getLogger(__name__)


class TwoScaleCommands:
    """Commands for the two-scale expansion experiment"""

    @staticmethod
    def register_all(registry: CommandRegistry):
        """Register all two-scale commands"""

        twoscale = Command(
            name="twoscale",
            description="Two-scale expansion defect over the epsilon list and its fitted convergence rate",
            outputs=("defect.csv", "ratefit.json"),
        )
        registry.register_command(twoscale, TwoScaleCommands.twoscale)

    @staticmethod
    async def twoscale(context: CommandContext):
        cfg = context.config
        report = await run_twoscale_async(cfg, context.workers)
        context.run.write_csv("defect.csv", DEFECT_COLUMNS, [row.to_row() for row in report.rows])
        side, n = cell_resolution(cfg)
        document = {
            "epsilon_list": list(cfg.twoscale.epsilon_list),
            "realizations": cfg.twoscale.realizations,
            "cell_side": side,
            "cell_cells_per_side": n,
        }
        if report.fit is None:
            document["fit"] = None
            logger.warning("No rate fit: needs three epsilons and positive defects")
        else:
            document["fit"] = report.fit.to_dict()
            logger.info(f"Two-scale rate {report.fit.rate:.3f} ({report.fit.model})")
        context.run.write_json("ratefit.json", document)
        context.run.add_timing("wall_seconds", report.wall_seconds)
        context.run.add_notes(report.notes)
