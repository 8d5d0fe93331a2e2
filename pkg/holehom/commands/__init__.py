"""
Command implementations for geometry sampling, correctors, diagnostics, ensembles and two-scale runs
"""

from .commands_registry import Command, CommandContext, CommandRegistry
from .commands_geometry import GeometryCommands, realize
from .commands_corrector import CorrectorCommands, solve_bundle
from .commands_quantify import QuantifyCommands
from .commands_ensemble import EnsembleCommands
from .commands_twoscale import TwoScaleCommands


def build_registry() -> CommandRegistry:
    """Registry with every command group registered"""
    registry = CommandRegistry()
    GeometryCommands.register_all(registry=registry)
    CorrectorCommands.register_all(registry=registry)
    QuantifyCommands.register_all(registry=registry)
    EnsembleCommands.register_all(registry=registry)
    TwoScaleCommands.register_all(registry=registry)
    return registry
