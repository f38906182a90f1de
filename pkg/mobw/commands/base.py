import csv
import logging
from abc import ABCMeta, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

from ..base import CommandError
from ..config import Command, RunConfig
from ..data import CompetingRisksDataset, load_dataset

logger = logging.getLogger(__name__)


class BaseCommand(metaclass=ABCMeta):
    """Abstract base class for mobw commands."""

    name: ClassVar[Command]
    description: ClassVar[str] = ""

    @abstractmethod
    async def __call__(self, cfg: RunConfig) -> "CommandResult":
        """Executes the command for a validated configuration."""
        ...

    def load(self, cfg: RunConfig) -> CompetingRisksDataset:
        if cfg.data is None:
            raise CommandError(f"{self.name} needs a dataset (--data)")
        return load_dataset(cfg.data, cfg.divisor, cfg.censoring, cfg.units)

    def write_csv(
        self,
        cfg: RunConfig,
        filename: str,
        header: Sequence[str],
        rows: Iterable[Sequence[object]],
    ) -> Path:
        """Writes a CSV under the output directory, first line `# manifest_hash=<hash>`."""
        path = cfg.out / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# manifest_hash={cfg.manifest_hash()}\n")
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        logger.info(f"wrote {path}")
        return path

    def write_manifest(self, cfg: RunConfig) -> Path:
        path = cfg.out / "manifest.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(cfg.manifest_text() + f"manifest_hash={cfg.manifest_hash()}\n", encoding="utf-8")
        return path


@dataclass(kw_only=True, frozen=True)
class CommandResult:
    """Represents the result of a command execution."""

    output: str | None = None
    error: str | None = None
    files: tuple[Path, ...] = ()


class CommandFailure(CommandResult):
    """A CommandResult that represents a failure."""
