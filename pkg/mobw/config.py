"""
Run configuration: a flat key=value file merged with command-line overrides and
validated by pydantic before any computation starts.
"""

import hashlib
from .base import StrEnum
from pathlib import Path
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
)

from .base import InvalidInputError, MOBWError, ParseError
from .data import CensoringScheme, parse_scheme
from .distributions import GDParams
from .inference import DEFAULT_LEVELS, BFHyper
from .samplers import AlphaMethod, PriorSpec
from .simulation import DEFAULT_SIZES, DEFAULT_STUDY_DRAWS, PARAMETER_SETS


class Command(StrEnum):
    ANALYZE = "analyze"
    SIMULATE = "simulate"
    BF_TEST = "bf-test"
    PLOT_DATA = "plot-data"


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    data: Path | None = None
    divisor: PositiveFloat = 1.0
    scheme: str = "complete"
    units: PositiveInt | None = None

    a: PositiveFloat = 0.001
    b: PositiveFloat = 0.001
    a0: PositiveFloat = 1.0
    a1: PositiveFloat = 1.0
    a2: PositiveFloat = 1.0
    c1: PositiveFloat = 0.001
    c2: PositiveFloat = 0.001
    # None means "match the MOBW prior" (d1=c1, d2=c2, d3=b, d4=a)
    d1: PositiveFloat | None = None
    d2: PositiveFloat | None = None
    d3: PositiveFloat | None = None
    d4: PositiveFloat | None = None

    draws: int = Field(default=100_000, ge=2)
    levels: tuple[float, ...] = DEFAULT_LEVELS
    ages: tuple[NonNegativeFloat, ...] = ()
    restricted: bool = False
    seed: int = Field(default=1, ge=0)
    out: Path = Path("out")
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION
    pooled: bool = False
    bf_mode: Literal["closed", "numeric"] = "closed"
    ks_method: Literal["asymptotic", "exact"] = "exact"

    sets: tuple[str, ...] = tuple(PARAMETER_SETS)
    sizes: tuple[PositiveInt, ...] = DEFAULT_SIZES
    replications: PositiveInt = 1000
    study_draws: int = Field(default=DEFAULT_STUDY_DRAWS, ge=100)
    workers: PositiveInt = 1
    timeout: PositiveFloat | None = None

    @field_validator("levels", "ages", "sets", "sizes", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("levels")
    @classmethod
    def check_levels(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value or any(not 0 < level < 1 for level in value):
            raise ValueError("every level must lie strictly between 0 and 1")
        return value

    @field_validator("sets")
    @classmethod
    def check_sets(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        unknown = [s for s in value if s not in PARAMETER_SETS]
        if unknown:
            raise ValueError(f"unknown parameter sets {unknown}; expected {list(PARAMETER_SETS)}")
        return value

    @field_validator("scheme")
    @classmethod
    def check_scheme(cls, value: str) -> str:
        try:
            return str(parse_scheme(value))
        except MOBWError as e:
            raise ValueError(e.message) from None

    @property
    def censoring(self) -> CensoringScheme:
        return parse_scheme(self.scheme)

    @property
    def prior(self) -> PriorSpec:
        return PriorSpec(GDParams(self.a, self.b, self.a0, self.a1, self.a2), self.c1, self.c2)

    @property
    def bf_hyper(self) -> BFHyper:
        matched = BFHyper.matching(self.prior)
        return BFHyper(
            d1=self.d1 or matched.d1,
            d2=self.d2 or matched.d2,
            d3=self.d3 or matched.d3,
            d4=self.d4 or matched.d4,
        )

    def manifest_text(self) -> str:
        """Sorted key=value lines of the resolved configuration."""
        lines = []
        for key, value in sorted(self.model_dump(mode="json").items()):
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={'' if value is None else value}")
        return "\n".join(lines) + "\n"

    def manifest_hash(self) -> str:
        return hashlib.sha256(self.manifest_text().encode("utf-8")).hexdigest()


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parses `key = value` lines; blank lines and `#` comments are ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"cannot read config {path}: {e.strerror or e}") from None
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"expected key=value, got {raw.strip()!r}", line_no)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _one_line(e: ValidationError) -> str:
    problems = []
    for err in e.errors():
        where = ".".join(str(part) for part in err["loc"]) or "config"
        problems.append(f"{where}: {err['msg']}")
    return "; ".join(problems)


def load_run_config(
    command: str, config_file: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Config file values, then non-None overrides, then validation."""
    values: dict[str, Any] = read_config_file(config_file) if config_file else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["command"] = command
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise InvalidInputError(f"invalid configuration: {_one_line(e)}") from None
