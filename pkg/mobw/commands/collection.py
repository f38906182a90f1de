"""Collection class for dispatching commands by name."""

import logging

from ..base import MOBWError
from ..config import RunConfig
from .base import BaseCommand, CommandFailure, CommandResult

logger = logging.getLogger(__name__)


class CommandCollection:
    """A collection of mobw commands."""

    def __init__(self, *commands: BaseCommand):
        self.command_map = {str(command.name): command for command in commands}

    def describe(self) -> str:
        """One `name  description` line per command, for the CLI help."""
        return "\n".join(f"  {name:<10} {command.description}" for name, command in self.command_map.items())

    async def run(self, *, name: str, cfg: RunConfig) -> CommandResult:
        command = self.command_map.get(str(name))
        if not command:
            return CommandFailure(error=f"Command {name} is invalid")
        try:
            return await command(cfg)
        except MOBWError as e:
            logger.error(f"{name} failed: {e.message}")
            return CommandFailure(error=e.message)
        except TimeoutError as e:
            logger.error(f"{name} failed: {e}")
            return CommandFailure(error=str(e))
        except OSError as e:
            logger.error(f"{name} failed: {e}")
            return CommandFailure(error=f"{e.filename or 'output'}: {e.strerror or e}")
