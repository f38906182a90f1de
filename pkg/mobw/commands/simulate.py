import logging
from typing import ClassVar

from ..config import Command, RunConfig
from ..inference import IntervalKind
from ..simulation import StudyResult, run_study_async, study_grid, write_study_csv
from .base import BaseCommand, CommandResult

logger = logging.getLogger(__name__)


class SimulateCommand(BaseCommand):
    """Monte Carlo study over the parameter-set and sample-size grid."""

    name: ClassVar[Command] = Command.SIMULATE
    description: ClassVar[str] = "run a Monte Carlo study of the estimators"

    async def __call__(self, cfg: RunConfig) -> CommandResult:
        configs = study_grid(
            cfg.sets,
            cfg.sizes,
            scheme=cfg.censoring,
            replications=cfg.replications,
            M=cfg.study_draws,
            levels=cfg.levels,
            restricted=cfg.restricted,
            master_seed=cfg.seed,
            prior=cfg.prior,
            method=cfg.method,
        )
        results: list[StudyResult] = []
        lines = []
        for study in configs:
            result = await run_study_async(study, workers=cfg.workers, timeout=cfg.timeout)
            results.append(result)
            level = 0.95 if 0.95 in study.levels else study.levels[0]
            cp = result.coverage(level, IntervalKind.SYMMETRIC)
            lines.append(
                f"set {study.label} n={study.n}: AE={_fmt(result.average_estimates)} "
                f"MSE={_fmt(result.mean_squared_errors)} CP{round(100 * level)}={_fmt(cp, 1)} "
                f"failures={result.failures}"
            )
        path = write_study_csv(results, cfg.out / "study.csv", cfg.manifest_hash())
        logger.info(f"wrote {path}")
        return CommandResult(output="\n".join(lines), files=(path, self.write_manifest(cfg)))


def _fmt(values, digits: int = 4) -> str:
    return "(" + ", ".join(f"{v:.{digits}f}" for v in values) + ")"
