import os
import sys
import asyncio
import logging
from pathlib import Path
from typing import Optional

from holehom.commands import CommandContext, build_registry
from holehom.errors import AdmissibilityError, ConfigError, FailureBudgetExceeded, HolehomError, NonConvergence
from holehom.io import RunDirectory, parse_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3

COMMANDS = (
    "sample-geometry",
    "corrector",
    "homogenize",
    "quantify",
    "ensemble",
    "twoscale",
    "probe",
    "variance-scaling",
)


def configure_logging(verbosity: int = 0):
    """Log to stderr: WARNING with -q, INFO by default, DEBUG with -v

    The level sits on the handler as well, so the run manifest can collect
    INFO notes without them reaching the terminal under -q.
    """
    level = logging.WARNING if verbosity < 0 else logging.DEBUG if verbosity > 0 else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter('%(levelname)s: %(name)s: %(message)s'))
    logging.root.handlers = [handler]
    logging.root.setLevel(level)


logger = logging.getLogger(__name__)


class RuntimeConfig:
    """Process settings that stay out of the experiment config"""

    def __init__(self, workers: Optional[int] = None, out: Optional[str] = None):
        self.workers = workers if workers is not None else int(os.environ.get('HOLEHOM_WORKERS', '1'))
        self.out = Path(out) if out is not None else Path('holehom-out')
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")


def exit_code(error: BaseException) -> int:
    if isinstance(error, (ConfigError, AdmissibilityError, ValueError)):
        return EXIT_INVALID
    if isinstance(error, (NonConvergence, FailureBudgetExceeded)):
        return EXIT_SOLVER
    return EXIT_ERROR


async def dispatch(command: str,
                   config_path,
                   out=None,
                   workers: Optional[int] = None,
                   dump_field: bool = False,
                   ) -> int:
    """Validate the config, run one command into its output directory and map failures to exit codes"""
    registry = build_registry()
    if command not in registry.commands:
        logger.error(f"Unknown command: {command}")
        return EXIT_INVALID
    try:
        runtime = RuntimeConfig(workers, out)
        config = parse_config(config_path)
    except (ConfigError, ValueError) as e:
        logger.error(f"Invalid configuration:\n{e}")
        return EXIT_INVALID

    try:
        with RunDirectory(runtime.out, command, config) as run:
            context = CommandContext(config=config, run=run, workers=runtime.workers, dump_field=dump_field)
            await registry.call_command(command, context)
    except (HolehomError, ValueError) as e:
        logger.error(f"{command} failed: {type(e).__name__}: {e}")
        return exit_code(e)
    logger.info(f"{command} complete: {runtime.out}")
    return EXIT_OK


def arg_main(argv=None):
    import argparse
    parser = argparse.ArgumentParser(prog="holehom", description="Quantitative homogenization of perforated random media")
    parser.add_argument("command", choices=COMMANDS, help="Experiment to run")
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=None, help="Output directory (default ./holehom-out)")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes (default $HOLEHOM_WORKERS or 1)")
    parser.add_argument("--dump-field", action="store_true", help="Save correctors, fluxes and sigma as .npy")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_const", const=1, dest="verbosity", default=0)
    verbosity.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbosity")
    args = parser.parse_args(argv)

    configure_logging(args.verbosity)
    sys.exit(asyncio.run(dispatch(args.command, args.config, args.out, args.workers, args.dump_field)))


if __name__ == "__main__":
    try:
        arg_main()
    except KeyboardInterrupt:
        logger.info("Run interrupted by user (Ctrl+C).")
