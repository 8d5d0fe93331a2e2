import logging
from dataclasses import dataclass
from typing import Awaitable, Callable, Dict, List

from holehom.io import RunConfig, RunDirectory

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    """Everything a command handler needs: validated config, output directory, process flags"""

    config: RunConfig
    run: RunDirectory
    workers: int = 1
    dump_field: bool = False


@dataclass(frozen=True)
class Command:
    name: str
    description: str
    outputs: tuple


Handler = Callable[[CommandContext], Awaitable[None]]


class CommandRegistry:
    """Registry for managing commands in a modular way"""

    def __init__(self):
        self.commands: Dict[str, Command] = {}
        self.handlers: Dict[str, Handler] = {}

    def register_command(self, command: Command, handler: Handler):
        """Register a command with its handler"""
        if command.name in self.commands:
            raise ValueError(f"Command already registered: {command.name}")
        self.commands[command.name] = command
        self.handlers[command.name] = handler
        logger.debug(f"Registered command: {command.name}")

    def get_commands(self) -> List[Command]:
        return list(self.commands.values())

    async def call_command(self, name: str, context: CommandContext):
        if name not in self.handlers:
            raise ValueError(f"Unknown command: {name}")
        await self.handlers[name](context)
