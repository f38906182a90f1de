"""
Monte Carlo studies: simulate MOBW competing-risks samples, censor them, run the
posterior pipeline and tabulate average estimates (AE), mean squared errors (MSE),
average interval lengths (AL) and coverage percentages (CP).
"""

import asyncio
import csv
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .base import InvalidInputError, MOBWError, StudyFailureError
from .data import CensoringScheme, Complete, apply_censoring
from .distributions import MOBWParams, sample_mobw
from .inference import CredibleInterval, IntervalKind, summarize
from .run import run
from .samplers import (
    PARAMETER_NAMES,
    AlphaMethod,
    PriorSpec,
    sample_posterior_restricted,
    sample_posterior_unrestricted,
)

logger = logging.getLogger(__name__)

PARAMETER_SETS = {
    "I": MOBWParams(2.0, 0.5, 1.0, 1.2),
    "II": MOBWParams(2.0, 1.0, 1.0, 1.2),
    "III": MOBWParams(2.0, 1.5, 1.0, 1.2),
}
DEFAULT_SIZES = (30, 40, 50)
DEFAULT_STUDY_DRAWS = 2000
MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class StudyConfig:
    true_params: MOBWParams
    n: int
    scheme: CensoringScheme = field(default_factory=Complete)
    replications: int = 1000
    M: int = DEFAULT_STUDY_DRAWS
    levels: tuple[float, ...] = (0.95,)
    restricted: bool = False
    master_seed: int = 0
    prior: PriorSpec = field(default_factory=PriorSpec.default)
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION
    label: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"sample size must be positive, got {self.n}")
        if self.replications < 1:
            raise InvalidInputError(f"replications must be at least 1, got {self.replications}")
        if self.M < 100:
            raise InvalidInputError(f"draws per replication must be at least 100, got {self.M}")
        levels = tuple(float(level) for level in self.levels)
        if not levels or any(not 0 < level < 1 for level in levels):
            raise InvalidInputError(f"levels must lie in (0, 1), got {self.levels}")
        object.__setattr__(self, "levels", levels)
        self.scheme.validate(self.n)


@dataclass(frozen=True, eq=False)
class ReplicationRecord:
    """Estimates and intervals of one replication, in PARAMETER_NAMES order."""

    index: int
    estimates: NDArray[np.float64]
    intervals: tuple[tuple[CredibleInterval, ...], ...]
    counts: tuple[int, int, int]
    ess: float

    def interval(self, parameter: int, level: float, kind: IntervalKind) -> CredibleInterval:
        for ci in self.intervals[parameter]:
            if ci.kind == kind and np.isclose(ci.level, level):
                return ci
        raise KeyError(f"no {kind} interval at level {level}")

    def covers(self, truth: Sequence[float], level: float, kind: IntervalKind) -> NDArray[np.bool_]:
        """Membership of each true parameter in its interval."""
        return np.array([truth[i] in self.interval(i, level, kind) for i in range(len(PARAMETER_NAMES))])


def run_replication(rng: np.random.Generator, cfg: StudyConfig, index: int = 0) -> ReplicationRecord:
    times, causes = sample_mobw(rng, cfg.true_params, cfg.n)
    d = apply_censoring(np.column_stack([times, causes]), cfg.scheme, rng)
    sampler = sample_posterior_restricted if cfg.restricted else sample_posterior_unrestricted
    s = sampler(rng, d, cfg.prior, cfg.M, cfg.method)
    report = summarize(s, cfg.levels)
    return ReplicationRecord(
        index=index,
        estimates=report.means,
        intervals=tuple(p.intervals for p in report.parameters),
        counts=d.counts,
        ess=s.ess,
    )


def _replicate(cfg: StudyConfig, index: int, seed: np.random.SeedSequence) -> ReplicationRecord:
    return run_replication(np.random.default_rng(seed), cfg, index)


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: StudyConfig
    records: tuple[ReplicationRecord, ...]
    failures: int = 0

    @property
    def truth(self) -> NDArray[np.float64]:
        return self.config.true_params.as_array()

    @property
    def estimates(self) -> NDArray[np.float64]:
        return np.array([r.estimates for r in self.records])

    @property
    def average_estimates(self) -> NDArray[np.float64]:
        return self.estimates.mean(axis=0)

    @property
    def mean_squared_errors(self) -> NDArray[np.float64]:
        return np.mean((self.estimates - self.truth) ** 2, axis=0)

    def average_length(self, level: float, kind: IntervalKind) -> NDArray[np.float64]:
        return np.array(
            [[r.interval(i, level, kind).length for i in range(len(PARAMETER_NAMES))] for r in self.records]
        ).mean(axis=0)

    def coverage(self, level: float, kind: IntervalKind) -> NDArray[np.float64]:
        """Coverage percentage per parameter."""
        hits = np.array([r.covers(self.truth, level, kind) for r in self.records])
        return 100.0 * hits.mean(axis=0)

    def to_rows(self) -> list[dict[str, object]]:
        cfg = self.config
        ae, mse = self.average_estimates, self.mean_squared_errors
        rows = []
        for i, name in enumerate(PARAMETER_NAMES):
            row: dict[str, object] = {
                "set": cfg.label,
                "n": cfg.n,
                "lambda0": cfg.true_params.lambda0,
                "scheme": str(cfg.scheme),
                "restricted": int(cfg.restricted),
                "parameter": name,
                "true": self.truth[i],
                "AE": ae[i],
                "MSE": mse[i],
            }
            for level in cfg.levels:
                for kind in IntervalKind:
                    tag = f"{kind.value}_{round(100 * level):g}"
                    row[f"AL_{tag}"] = self.average_length(level, kind)[i]
                    row[f"CP_{tag}"] = self.coverage(level, kind)[i]
            row["replications"] = len(self.records)
            row["failures"] = self.failures
            rows.append(row)
        return rows


def _collect(cfg: StudyConfig, outcomes: list[ReplicationRecord | Exception]) -> StudyResult:
    records = []
    failures = 0
    for i, outcome in enumerate(outcomes):
        if isinstance(outcome, ReplicationRecord):
            records.append(outcome)
            continue
        failures += 1
        reason = outcome.message if isinstance(outcome, MOBWError) else repr(outcome)
        logger.warning(f"replication {i} excluded: {reason}")
    if failures > MAX_FAILURE_RATE * cfg.replications:
        raise StudyFailureError(
            f"{failures} of {cfg.replications} replications failed, above the {MAX_FAILURE_RATE:.0%} limit"
        )
    return StudyResult(cfg, tuple(records), failures)


async def run_study_async(
    cfg: StudyConfig, workers: int = 1, timeout: float | None = None
) -> StudyResult:
    """Replications draw from SeedSequence children of the master seed, so results do not depend on `workers`."""
    seeds = np.random.SeedSequence(cfg.master_seed).spawn(cfg.replications)
    jobs = [(cfg, i, seed) for i, seed in enumerate(seeds)]
    logger.info(
        f"study {cfg.label or '-'}: n={cfg.n}, {cfg.scheme}, restricted={cfg.restricted}, "
        f"{cfg.replications} replications x {cfg.M} draws on {workers} worker(s)"
    )
    outcomes = await run(_replicate, jobs, workers=workers, timeout=timeout)
    return _collect(cfg, outcomes)


def run_study(cfg: StudyConfig, workers: int = 1, timeout: float | None = None) -> StudyResult:
    return asyncio.run(run_study_async(cfg, workers, timeout))


def study_grid(
    sets: Iterable[str] = tuple(PARAMETER_SETS),
    sizes: Iterable[int] = DEFAULT_SIZES,
    **common,
) -> list[StudyConfig]:
    """One StudyConfig per (parameter set, n) cell; `common` holds the remaining StudyConfig fields."""
    configs = []
    for name in sets:
        if name not in PARAMETER_SETS:
            raise InvalidInputError(f"unknown parameter set {name!r}; expected one of {', '.join(PARAMETER_SETS)}")
        for n in sizes:
            configs.append(StudyConfig(true_params=PARAMETER_SETS[name], n=int(n), label=name, **common))
    return configs


def write_study_csv(
    results: Sequence[StudyResult], path: str | Path, manifest_hash: str | None = None
) -> Path:
    path = Path(path)
    rows = [row for result in results for row in result.to_rows()]
    if not rows:
        raise InvalidInputError("no study results to write")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if manifest_hash:
            f.write(f"# manifest_hash={manifest_hash}\n")
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return path
