"""
Competing-risks datasets, censoring schemes and the sufficient statistics every
posterior computation consumes.

Each censoring scheme enters the likelihood only through the counts (n*, n0, n1, n2),
the sum of log failure times and the exposure

    D(alpha) = sum_j w_j * s_j**alpha,

a weighted sum over observed failure times and censoring epochs. Schemes
describe themselves by returning the (s_j, w_j) pairs.
"""

import csv
import logging
from abc import ABCMeta, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from .base import StrEnum
from functools import cached_property
from pathlib import Path
from typing import ClassVar, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .base import DomainError, InvalidInputError, ParseError, SchemeError, require_positive

logger = logging.getLogger(__name__)

CAUSES = (0, 1, 2)


class SchemeKind(StrEnum):
    COMPLETE = "complete"
    TYPE_I = "type1"
    TYPE_II = "type2"
    HYBRID_I = "hybrid1"
    HYBRID_II = "hybrid2"
    PROGRESSIVE_I = "progressive1"
    PROGRESSIVE_II = "progressive2"


class CensorOutcome(NamedTuple):
    kept: NDArray[np.int64]
    scheme: "CensoringScheme"
    truncated: bool = False


def _type_i_terms(times: NDArray[np.float64], n: int, tau: float):
    if times.size and times[-1] > tau:
        raise SchemeError(f"observed time {times[-1]} exceeds the termination time {tau}")
    survivors = n - times.size
    s = np.append(times, tau)
    w = np.append(np.ones(times.size), survivors)
    return s, w


def _type_ii_terms(times: NDArray[np.float64], n: int, r: int):
    if times.size != r:
        raise SchemeError(f"expected exactly r={r} observed failures, got {times.size}")
    s = np.append(times, times[-1])
    w = np.append(np.ones(r), n - r)
    return s, w


class CensoringScheme(metaclass=ABCMeta):
    """Abstract base class for censoring schemes."""

    kind: ClassVar[SchemeKind]

    def validate(self, n: int) -> None:
        """Checks the scheme parameters against the number of units on test."""

    @abstractmethod
    def exposure_terms(
        self, times: NDArray[np.float64], n: int
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """(s_j, w_j) pairs of D(alpha) for sorted observed failure times."""
        ...

    @abstractmethod
    def censor(self, times: NDArray[np.float64], rng: np.random.Generator) -> CensorOutcome:
        """Indices of the sorted complete sample an experimenter would observe."""
        ...

    @classmethod
    @abstractmethod
    def from_params(cls, params: dict[str, str]) -> "CensoringScheme":
        ...


@dataclass(frozen=True)
class Complete(CensoringScheme):
    kind: ClassVar[SchemeKind] = SchemeKind.COMPLETE

    def exposure_terms(self, times, n):
        if times.size != n:
            raise SchemeError(f"complete data needs all {n} failures, got {times.size}")
        return times, np.ones(n)

    def censor(self, times, rng):
        return CensorOutcome(np.arange(times.size), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, set())
        return cls()

    def __str__(self):
        return self.kind.value


@dataclass(frozen=True)
class TypeI(CensoringScheme):
    tau: float
    kind: ClassVar[SchemeKind] = SchemeKind.TYPE_I

    def __post_init__(self):
        object.__setattr__(self, "tau", require_positive("tau", self.tau))

    def exposure_terms(self, times, n):
        return _type_i_terms(times, n, self.tau)

    def censor(self, times, rng):
        return CensorOutcome(np.flatnonzero(times <= self.tau), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"tau"})
        return cls(tau=_float(params, "tau"))

    def __str__(self):
        return f"{self.kind}:tau={self.tau!r}"


@dataclass(frozen=True)
class TypeII(CensoringScheme):
    r: int
    kind: ClassVar[SchemeKind] = SchemeKind.TYPE_II

    def validate(self, n):
        _check_r(self.r, n)

    def exposure_terms(self, times, n):
        return _type_ii_terms(times, n, self.r)

    def censor(self, times, rng):
        return CensorOutcome(np.arange(self.r), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"r"})
        return cls(r=_int(params, "r"))

    def __str__(self):
        return f"{self.kind}:r={self.r}"


@dataclass(frozen=True)
class HybridI(CensoringScheme):
    """Stops at min(t_{r:n}, tau)."""

    r: int
    tau: float
    kind: ClassVar[SchemeKind] = SchemeKind.HYBRID_I

    def __post_init__(self):
        object.__setattr__(self, "tau", require_positive("tau", self.tau))

    def validate(self, n):
        _check_r(self.r, n)

    def exposure_terms(self, times, n):
        if times.size > self.r:
            raise SchemeError(f"hybrid Type-I data has at most r={self.r} failures, got {times.size}")
        if times.size and times[-1] > self.tau:
            raise SchemeError(f"observed time {times[-1]} exceeds tau={self.tau}")
        if times.size == self.r:
            return _type_ii_terms(times, n, self.r)
        return _type_i_terms(times, n, self.tau)

    def censor(self, times, rng):
        if self.tau >= times[self.r - 1]:
            return CensorOutcome(np.arange(self.r), self)
        return CensorOutcome(np.flatnonzero(times <= self.tau), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"r", "tau"})
        return cls(r=_int(params, "r"), tau=_float(params, "tau"))

    def __str__(self):
        return f"{self.kind}:r={self.r}:tau={self.tau!r}"


@dataclass(frozen=True)
class HybridII(CensoringScheme):
    """Stops at max(t_{r:n}, tau)."""

    r: int
    tau: float
    kind: ClassVar[SchemeKind] = SchemeKind.HYBRID_II

    def __post_init__(self):
        object.__setattr__(self, "tau", require_positive("tau", self.tau))

    def validate(self, n):
        _check_r(self.r, n)

    def exposure_terms(self, times, n):
        if times.size < self.r:
            raise SchemeError(f"hybrid Type-II data has at least r={self.r} failures, got {times.size}")
        if times.size == self.r and times[-1] >= self.tau:
            return _type_ii_terms(times, n, self.r)
        return _type_i_terms(times, n, self.tau)

    def censor(self, times, rng):
        if self.tau <= times[self.r - 1]:
            return CensorOutcome(np.arange(self.r), self)
        return CensorOutcome(np.flatnonzero(times <= self.tau), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"r", "tau"})
        return cls(r=_int(params, "r"), tau=_float(params, "tau"))

    def __str__(self):
        return f"{self.kind}:r={self.r}:tau={self.tau!r}"


@dataclass(frozen=True)
class ProgressiveI(CensoringScheme):
    """
    Inspection epochs tau_1 < ... < tau_k with R_1..R_{k-1} random withdrawals;
    every survivor is withdrawn at tau_k.
    """

    taus: tuple[float, ...]
    removals: tuple[int, ...]
    kind: ClassVar[SchemeKind] = SchemeKind.PROGRESSIVE_I

    def __post_init__(self):
        taus = tuple(require_positive("tau", t) for t in self.taus)
        removals = tuple(int(r) for r in self.removals)
        if not taus:
            raise SchemeError("progressive Type-I censoring needs at least one epoch")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise SchemeError(f"epochs must be strictly increasing, got {taus}")
        if len(removals) != len(taus) - 1:
            raise SchemeError(f"expected {len(taus) - 1} removal counts for {len(taus)} epochs, got {len(removals)}")
        if any(r < 0 for r in removals):
            raise SchemeError(f"removal counts must be nonnegative, got {removals}")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "removals", removals)

    def final_removal(self, n: int, n_star: int) -> int:
        return n - n_star - sum(self.removals)

    def exposure_terms(self, times, n):
        if times.size and times[-1] > self.taus[-1]:
            raise SchemeError(f"observed time {times[-1]} exceeds the last epoch {self.taus[-1]}")
        last = self.final_removal(n, times.size)
        if last < 0:
            raise SchemeError(f"removals {self.removals} exceed the {n - times.size} censored units")
        weights = np.array(self.removals + (last,), dtype=float)
        s = np.append(times, self.taus)
        w = np.append(np.ones(times.size), weights)
        return s, w

    def censor(self, times, rng):
        alive = np.ones(times.size, dtype=bool)
        kept: list[int] = []
        for i, tau in enumerate(self.taus):
            failed = np.flatnonzero(alive & (times <= tau))
            kept.extend(failed.tolist())
            alive[failed] = False
            if i == len(self.taus) - 1:
                break
            survivors = np.flatnonzero(alive)
            want = self.removals[i]
            if want > survivors.size:
                logger.warning(
                    f"only {survivors.size} units survive at tau={tau}, cannot remove {want}; "
                    "withdrawing all survivors and terminating"
                )
                realized = ProgressiveI(self.taus[: i + 1], self.removals[:i])
                return CensorOutcome(np.array(kept, dtype=np.int64), realized, truncated=True)
            alive[rng.choice(survivors, size=want, replace=False)] = False
        return CensorOutcome(np.array(kept, dtype=np.int64), self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"taus", "removals"})
        removals = _ints(params["removals"]) if params.get("removals") else ()
        return cls(taus=_floats(params, "taus"), removals=removals)

    def __str__(self):
        taus = ",".join(repr(t) for t in self.taus)
        removals = ",".join(str(r) for r in self.removals)
        return f"{self.kind}:taus={taus}:removals={removals}"


@dataclass(frozen=True)
class ProgressiveII(CensoringScheme):
    """R_i random withdrawals at the i-th failure, m + sum(R) = n."""

    removals: tuple[int, ...]
    kind: ClassVar[SchemeKind] = SchemeKind.PROGRESSIVE_II

    def __post_init__(self):
        removals = tuple(int(r) for r in self.removals)
        if not removals:
            raise SchemeError("progressive Type-II censoring needs m >= 1")
        if any(r < 0 for r in removals):
            raise SchemeError(f"removal counts must be nonnegative, got {removals}")
        object.__setattr__(self, "removals", removals)

    @property
    def m(self) -> int:
        return len(self.removals)

    def validate(self, n):
        if self.m + sum(self.removals) != n:
            raise SchemeError(f"m + sum(R) = {self.m + sum(self.removals)} must equal n = {n}")

    def exposure_terms(self, times, n):
        if times.size != self.m:
            raise SchemeError(f"expected m={self.m} observed failures, got {times.size}")
        return times, np.array(self.removals, dtype=float) + 1.0

    def censor(self, times, rng):
        alive = np.ones(times.size, dtype=bool)
        kept = np.empty(self.m, dtype=np.int64)
        for i, want in enumerate(self.removals):
            first = int(np.argmax(alive))
            kept[i] = first
            alive[first] = False
            survivors = np.flatnonzero(alive)
            alive[rng.choice(survivors, size=want, replace=False)] = False
        return CensorOutcome(kept, self)

    @classmethod
    def from_params(cls, params):
        _no_extra(params, {"removals"})
        return cls(removals=_ints(params.get("removals", "")))

    def __str__(self):
        return f"{self.kind}:removals=" + ",".join(str(r) for r in self.removals)


_SCHEMES: dict[SchemeKind, type[CensoringScheme]] = {
    cls.kind: cls
    for cls in (Complete, TypeI, TypeII, HybridI, HybridII, ProgressiveI, ProgressiveII)
}


def parse_scheme(text: str) -> CensoringScheme:
    """Parses `kind[:key=value]...`, e.g. `hybrid1:r=30:tau=2` or `progressive2:removals=1,1,0`."""
    name, *pairs = text.strip().split(":")
    try:
        kind = SchemeKind(name.strip().lower())
    except ValueError:
        raise SchemeError(
            f"unknown censoring scheme {name!r}; expected one of {', '.join(k.value for k in SchemeKind)}"
        ) from None
    params: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise SchemeError(f"malformed scheme parameter {pair!r} in {text!r}")
        params[key.strip()] = value.strip()
    return _SCHEMES[kind].from_params(params)


def _no_extra(params: dict[str, str], allowed: set[str]) -> None:
    extra = set(params) - allowed
    if extra:
        raise SchemeError(f"unexpected scheme parameters: {', '.join(sorted(extra))}")


def _float(params: dict[str, str], key: str) -> float:
    if key not in params:
        raise SchemeError(f"missing scheme parameter {key!r}")
    try:
        return float(params[key])
    except ValueError:
        raise SchemeError(f"scheme parameter {key}={params[key]!r} is not a number") from None


def _floats(params: dict[str, str], key: str) -> tuple[float, ...]:
    if key not in params:
        raise SchemeError(f"missing scheme parameter {key!r}")
    try:
        return tuple(float(v) for v in params[key].split(","))
    except ValueError:
        raise SchemeError(f"scheme parameter {key}={params[key]!r} is not a list of numbers") from None


def _int(params: dict[str, str], key: str) -> int:
    if key not in params:
        raise SchemeError(f"missing scheme parameter {key!r}")
    try:
        return int(params[key])
    except ValueError:
        raise SchemeError(f"scheme parameter {key}={params[key]!r} is not an integer") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise SchemeError(f"{text!r} is not a list of integers") from None


def _check_r(r: int, n: int) -> None:
    if not 1 <= r <= n:
        raise SchemeError(f"r must satisfy 1 <= r <= n = {n}, got {r}")


@dataclass(frozen=True)
class Observation:
    time: float
    cause: int


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Counts, sum of log failure times, and D(alpha) as a log-sum-exp over (s_j, w_j)."""

    n_star: int
    n0: int
    n1: int
    n2: int
    sum_log_times: float
    log_s: NDArray[np.float64]
    log_w: NDArray[np.float64]

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n0, self.n1, self.n2)

    def log_exposure(self, alpha: ArrayLike) -> float | NDArray[np.float64]:
        alpha = np.asarray(alpha, dtype=float)
        out = logsumexp(alpha[..., None] * self.log_s + self.log_w, axis=-1)
        return float(out) if out.ndim == 0 else out

    def exposure(self, alpha: ArrayLike) -> float | NDArray[np.float64]:
        return np.exp(self.log_exposure(alpha))

    def log_exposure_slope(self, alpha: ArrayLike) -> float | NDArray[np.float64]:
        """d/dalpha log D(alpha): the D-weighted mean of log s_j."""
        alpha = np.asarray(alpha, dtype=float)
        terms = alpha[..., None] * self.log_s + self.log_w
        weights = np.exp(terms - logsumexp(terms, axis=-1, keepdims=True))
        out = np.sum(weights * self.log_s, axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CompetingRisksDataset:
    """Observed failures sorted ascending (stable), their causes, and n units on test."""

    times: NDArray[np.float64]
    causes: NDArray[np.int64]
    n: int
    scheme: CensoringScheme = field(default_factory=Complete)
    truncated: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        causes = np.asarray(self.causes).reshape(-1)
        if times.shape != causes.shape:
            raise InvalidInputError("times and causes must have the same length")
        if np.any(~(times > 0)) or np.any(~np.isfinite(times)):
            raise InvalidInputError("failure times must be finite and positive")
        if not np.all(np.isin(causes, CAUSES)):
            raise InvalidInputError(f"causes must be in {CAUSES}, got {sorted(set(causes.tolist()))}")
        n = int(self.n)
        if n < max(times.size, 1):
            raise InvalidInputError(f"n = {n} units cannot produce {times.size} failures")
        order = np.argsort(times, kind="stable")
        times = times[order]
        causes = causes[order].astype(np.int64)
        times.flags.writeable = False
        causes.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "causes", causes)
        object.__setattr__(self, "n", n)
        self.scheme.validate(n)
        self.scheme.exposure_terms(times, n)
        if self.n_star == 0:
            logger.warning(f"degenerate dataset: no failures observed under {self.scheme}")
        else:
            missing = [c for c, count in zip(CAUSES, self.counts) if count == 0]
            if missing:
                logger.warning(f"no failures observed for cause(s) {missing}; posterior relies on the prior there")

    @classmethod
    def from_observations(
        cls,
        observations: Iterable[Observation | tuple[float, int]],
        n: int | None = None,
        scheme: CensoringScheme | None = None,
    ) -> "CompetingRisksDataset":
        pairs = [(float(o[0]), int(o[1])) if not isinstance(o, Observation) else (o.time, o.cause) for o in observations]
        times = np.array([p[0] for p in pairs], dtype=float)
        causes = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(times, causes, len(pairs) if n is None else n, scheme or Complete())

    @property
    def n_star(self) -> int:
        return int(self.times.size)

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(int(np.count_nonzero(self.causes == c)) for c in CAUSES)

    @property
    def degenerate(self) -> bool:
        return self.n_star == 0

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(Observation(float(t), int(c)) for t, c in zip(self.times, self.causes))

    @cached_property
    def stats(self) -> SufficientStats:
        s, w = self.scheme.exposure_terms(self.times, self.n)
        keep = w > 0
        n0, n1, n2 = self.counts
        return SufficientStats(
            n_star=self.n_star,
            n0=n0,
            n1=n1,
            n2=n2,
            sum_log_times=float(np.sum(np.log(self.times))),
            log_s=np.log(s[keep]),
            log_w=np.log(w[keep]),
        )


def exposure(d: CompetingRisksDataset, alpha: float) -> float:
    """The scheme-specific D(alpha, tau*)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return float(d.stats.exposure(alpha))


def load_dataset(
    path: str | Path,
    time_divisor: float = 1.0,
    scheme: CensoringScheme | None = None,
    n: int | None = None,
) -> CompetingRisksDataset:
    """
    Reads a `time,cause` CSV with a header row. Lines starting with `#` are skipped.
    `n` is the number of units on test; it defaults to the number of rows, which is
    right for complete data.
    """
    divisor = require_positive("time_divisor", time_divisor)
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = [(i, row) for i, row in enumerate(csv.reader(f), start=1)]
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {e.strerror or e}") from None
    rows = [(i, row) for i, row in rows if row and "".join(row).strip() and not row[0].lstrip().startswith("#")]
    if not rows:
        raise InvalidInputError(f"{path} is empty")
    header_line, header = rows[0]
    if [h.strip().lower() for h in header] != ["time", "cause"]:
        raise ParseError(f"expected header 'time,cause', got {','.join(header)!r}", header_line)
    times, causes = [], []
    for line, row in rows[1:]:
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", line)
        try:
            t, c = float(row[0]), int(row[1])
        except ValueError:
            raise ParseError(f"cannot parse {','.join(row)!r} as (time, cause)", line) from None
        if not t > 0:
            raise ParseError(f"time must be positive, got {row[0].strip()}", line)
        if c not in CAUSES:
            raise ParseError(f"cause must be 0, 1 or 2, got {c}", line)
        times.append(t / divisor)
        causes.append(c)
    if not times:
        raise InvalidInputError(f"{path} holds no observations")
    logger.info(f"loaded {len(times)} observations from {path}")
    return CompetingRisksDataset(
        np.array(times), np.array(causes), len(times) if n is None else n, scheme or Complete()
    )


def save_dataset(d: CompetingRisksDataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time", "cause"])
        for t, c in zip(d.times, d.causes):
            writer.writerow([repr(float(t)), int(c)])


def apply_censoring(
    complete: Sequence[tuple[float, int]] | NDArray,
    scheme: CensoringScheme,
    rng: np.random.Generator,
) -> CompetingRisksDataset:
    """Censors a complete sample the way the experiment described by `scheme` would."""
    arr = np.asarray(complete, dtype=float).reshape(-1, 2)
    order = np.argsort(arr[:, 0], kind="stable")
    times, causes = arr[order, 0], arr[order, 1].astype(np.int64)
    n = times.size
    scheme.validate(n)
    outcome = scheme.censor(times, rng)
    kept = np.sort(outcome.kept)
    return CompetingRisksDataset(times[kept], causes[kept], n, outcome.scheme, outcome.truncated)
