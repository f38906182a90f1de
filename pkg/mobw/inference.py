"""
Posterior summaries, credible intervals, the Bayes factor for lambda1 = lambda2,
and Kolmogorov-Smirnov goodness of fit of the minimum-lifetime Weibull.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from .base import StrEnum
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad
from scipy.special import gammaincc, gammaln, kolmogorov
from scipy.stats import kstwo

from .base import DomainError, HyperMismatchError, InsufficientSampleError, InvalidInputError, require_positive
from .data import CompetingRisksDataset, SchemeKind
from .distributions import MOBWParams, WeibullParams
from .samplers import (
    PARAMETER_NAMES,
    AlphaMarginal,
    AlphaMethod,
    PriorSpec,
    WeightedSample,
    find_alpha_mode,
    make_alpha_sampler,
)

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.90, 0.95, 0.99)
_RANK_TOL = 1e-9
_MASS_TOL = 1e-12
_TAIL_HAZARD = 500.0


class IntervalKind(StrEnum):
    SYMMETRIC = "symmetric"
    HPD = "hpd"


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    level: float
    kind: IntervalKind

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise InvalidInputError(f"interval bounds out of order: ({self.lower}, {self.upper})")
        if not 0 < self.level < 1:
            raise InvalidInputError(f"credible level must lie in (0, 1), got {self.level}")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def __contains__(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    variance: float
    intervals: tuple[CredibleInterval, ...] = ()

    def interval(self, level: float, kind: IntervalKind | str) -> CredibleInterval:
        for ci in self.intervals:
            if ci.kind == kind and math.isclose(ci.level, level):
                return ci
        raise KeyError(f"no {kind} interval at level {level} for {self.name}")


@dataclass(frozen=True)
class EstimateReport:
    parameters: tuple[ParameterSummary, ...]
    M: int
    restricted: bool = False
    ess: float = field(default=float("nan"))
    seed: int | None = None
    scheme: str = SchemeKind.COMPLETE.value

    def __getitem__(self, name: str) -> ParameterSummary:
        for summary in self.parameters:
            if summary.name == name:
                return summary
        raise KeyError(name)

    @property
    def means(self) -> NDArray[np.float64]:
        return np.array([self[name].mean for name in PARAMETER_NAMES])

    @property
    def params(self) -> MOBWParams:
        return MOBWParams(*self.means)

    @property
    def min_lifetime(self) -> WeibullParams:
        """Law of T = min(X1, X2) at the Bayes estimates: Weibull(alpha, lambda0 + lambda1 + lambda2)."""
        p = self.params
        return WeibullParams(p.shape, p.lambda_total)


def _weighted_moments(values: NDArray[np.float64], weights: NDArray[np.float64]) -> tuple[float, float]:
    mean = float(np.sum(weights * values))
    variance = float(np.sum(weights * (values - mean) ** 2))
    return mean, variance


def point_estimates(s: WeightedSample) -> EstimateReport:
    """Bayes estimates under squared error loss and posterior variances."""
    if s.M < 2:
        raise InsufficientSampleError(f"need at least 2 draws for posterior variances, got {s.M}")
    values = s.values
    parameters = []
    for i, name in enumerate(PARAMETER_NAMES):
        if s.is_uniform:
            mean, variance = float(values[:, i].mean()), float(values[:, i].var())
        else:
            mean, variance = _weighted_moments(values[:, i], s.weights)
        parameters.append(ParameterSummary(name, mean, variance))
    return EstimateReport(tuple(parameters), M=s.M, restricted=s.restricted, ess=s.ess)


def _prepare(
    values: ArrayLike, weights: ArrayLike | None, gamma: float
) -> tuple[NDArray[np.float64], NDArray[np.float64] | None]:
    values = np.asarray(values, dtype=float).reshape(-1)
    if not 0 < gamma < 1:
        raise InvalidInputError(f"gamma must lie in (0, 1), got {gamma}")
    if values.size * gamma < 1 - _RANK_TOL:
        raise InsufficientSampleError(
            f"{values.size} draws cannot resolve a {100 * (1 - gamma):g}% interval; need at least {math.ceil(1 / gamma)}"
        )
    order = np.argsort(values, kind="stable")
    if weights is None:
        return values[order], None
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape != values.shape:
        raise InvalidInputError("weights must have one entry per value")
    if np.any(weights < 0) or not weights.sum() > 0:
        raise InvalidInputError("weights must be nonnegative and not all zero")
    if np.all(weights == weights[0]):
        return values[order], None
    return values[order], weights[order] / weights.sum()


def _symmetric_ranks(m: int, weights: NDArray[np.float64] | None, gamma: float) -> tuple[int, int]:
    if weights is None:
        lo = math.ceil(gamma / 2 * m - _RANK_TOL)
        hi = math.floor((1 - gamma / 2) * m + _RANK_TOL)
        return min(max(lo, 1), m) - 1, min(max(hi, 1), m) - 1
    cumulative = np.cumsum(weights)
    lo = int(np.searchsorted(cumulative, gamma / 2 - _MASS_TOL, side="left"))
    hi = int(np.searchsorted(cumulative, 1 - gamma / 2 - _MASS_TOL, side="left"))
    return min(lo, m - 1), min(hi, m - 1)


def symmetric_cri(values: ArrayLike, weights: ArrayLike | None, gamma: float) -> CredibleInterval:
    """
    Equal-tailed 100(1-gamma)% interval. Unweighted ranks are ceil(gamma/2 M) and
    floor((1-gamma/2) M); weighted bounds are the smallest order statistics whose
    cumulative weight reaches gamma/2 and 1-gamma/2.
    """
    v, w = _prepare(values, weights, gamma)
    lo, hi = _symmetric_ranks(v.size, w, gamma)
    return CredibleInterval(float(v[lo]), float(v[hi]), 1 - gamma, IntervalKind.SYMMETRIC)


def _range_argmin(values: NDArray[np.float64], left: NDArray[np.intp], right: NDArray[np.intp]) -> NDArray[np.intp]:
    """Leftmost index of the minimum of values[left[i] : right[i] + 1] for every i (sparse table)."""
    n = values.size
    table = np.zeros((max(n.bit_length(), 1), n), dtype=np.intp)
    table[0] = np.arange(n)
    span = 1
    for row in range(1, table.shape[0]):
        a = table[row - 1, : n - 2 * span + 1]
        b = table[row - 1, span : n - span + 1]
        table[row, : a.size] = np.where(values[b] < values[a], b, a)
        span *= 2
    width = np.maximum(right - left + 1, 1)
    row = np.floor(np.log2(width)).astype(np.intp)
    a = table[row, left]
    b = table[row, right - (1 << row) + 1]
    return np.where(values[b] < values[a], b, a)


def _hpd_ladder(
    v: NDArray[np.float64], w: NDArray[np.float64] | None, gammas: Sequence[float]
) -> dict[float, tuple[int, int]]:
    """
    Order-statistic windows for every gamma in `gammas`, nested from the widest
    level inward. At each level the candidates are the windows starting at v_(j)
    that hold at least the weight of the equal-tailed interval, no longer than it.
    The chain minimising the summed length wins, ties going to the smallest starts.
    """
    m = v.size
    starts = np.arange(m)
    if w is not None:
        through = np.cumsum(w)
        before = through - w
    levels = sorted({round(g, 12) for g in gammas})
    chain = []
    cost = None
    for gamma in levels:
        lo, hi = _symmetric_ranks(m, w, gamma)
        if w is None:
            ends = starts + (hi - lo)
        else:
            mass = through[hi] - before[lo]
            ends = np.searchsorted(through, before + mass - _MASS_TOL, side="left")
        lengths = np.full(m, np.inf)
        fits = ends < m
        lengths[fits] = v[ends[fits]] - v[fits]
        lengths[lengths > v[hi] - v[lo]] = np.inf
        if cost is None:
            parents = starts
            cost = lengths
        else:
            prev_ends, prev_cost = chain[-1][0], cost
            first = np.searchsorted(prev_ends, np.minimum(ends, m), side="left")
            parents = _range_argmin(prev_cost, np.minimum(first, starts), starts)
            cost = np.where(first <= starts, lengths + prev_cost[parents], np.inf)
        chain.append((ends, parents))
    j = int(np.argmin(cost))
    if not np.isfinite(cost[j]):
        raise InsufficientSampleError(f"no nested credible windows found over {m} draws")
    out = {}
    for gamma, (ends, parents) in zip(reversed(levels), reversed(chain)):
        out[gamma] = (j, int(ends[j]))
        j = int(parents[j])
    return out


def _ladder(m: int, gamma: float, nested_with: Sequence[float]) -> list[float]:
    return [gamma] + [1 - level for level in nested_with if m * (1 - level) >= 1 - _RANK_TOL]


def hpd_cri(
    values: ArrayLike, weights: ArrayLike | None, gamma: float, nested_with: Sequence[float] = DEFAULT_LEVELS
) -> CredibleInterval:
    """
    Highest posterior density interval (v_(j1), v_(j2)): the shortest window over
    the order statistics that carries at least the weight of the equal-tailed
    interval at the same gamma, so it is never the longer of the two. Uniform
    weights give j2 = j1 + (hi - lo) with the equal-tailed ranks lo, hi.

    The windows for gamma and for every level in `nested_with` are chosen jointly
    so that they nest; calls sharing `nested_with` on the same sample always
    return 99% ⊇ 95% ⊇ 90%.
    """
    v, w = _prepare(values, weights, gamma)
    lo, hi = _hpd_ladder(v, w, _ladder(v.size, gamma, nested_with))[round(gamma, 12)]
    return CredibleInterval(float(v[lo]), float(v[hi]), 1 - gamma, IntervalKind.HPD)


def _intervals(values: NDArray[np.float64], weights: NDArray[np.float64] | None, levels: Sequence[float]):
    ladder = tuple(sorted(set(DEFAULT_LEVELS) | set(levels)))
    out = []
    for level in levels:
        gamma = 1 - level
        out.append(symmetric_cri(values, weights, gamma))
        out.append(hpd_cri(values, weights, gamma, nested_with=ladder))
    return tuple(out)


def summarize(
    s: WeightedSample,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int | None = None,
    scheme: str = SchemeKind.COMPLETE.value,
) -> EstimateReport:
    """Point estimates plus symmetric and HPD intervals for every parameter at every level."""
    core = point_estimates(s)
    weights = None if s.is_uniform else s.weights
    parameters = tuple(
        ParameterSummary(p.name, p.mean, p.variance, _intervals(s.column(p.name), weights, levels))
        for p in core.parameters
    )
    return EstimateReport(parameters, M=s.M, restricted=s.restricted, ess=s.ess, seed=seed, scheme=scheme)


def functional_estimate(
    s: WeightedSample,
    g: Callable[[NDArray, NDArray, NDArray, NDArray], ArrayLike],
    levels: Sequence[float] = DEFAULT_LEVELS,
    name: str = "g",
) -> ParameterSummary:
    """Bayes estimate, posterior variance and intervals of g(alpha, lambda0, lambda1, lambda2)."""
    values = np.asarray(g(s.alpha, *s.scales.T), dtype=float).reshape(-1)
    if values.size != s.M:
        raise InvalidInputError(f"g must return one value per draw, got {values.size} for {s.M} draws")
    weights = None if s.is_uniform else s.weights
    mean, variance = _weighted_moments(values, s.weights)
    return ParameterSummary(name, mean, variance, _intervals(values, weights, levels))


def expected_lifetime(alpha: ArrayLike, lam: ArrayLike) -> float | NDArray[np.float64]:
    """E(T) = lambda**(-1/alpha) * Gamma(1 + 1/alpha) for S(t) = exp(-lambda t**alpha)."""
    alpha = np.asarray(alpha, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.exp(gammaln(1 + 1 / alpha) - np.log(lam) / alpha)
    return float(out) if out.ndim == 0 else out


def _residual_tail(alpha: float, hazard: float, a: float) -> float:
    """Integral of S(a + u) / S(a) over u > 0, with S(a + u) / S(a) = exp(-hazard * ((1 + u/a)**alpha - 1))."""
    width = a / (alpha * hazard)

    def residual(u: float) -> float:
        return math.exp(-hazard * math.expm1(alpha * math.log1p(u / a)))

    near, _ = quad(residual, 0.0, 50 * width, limit=200)
    far, _ = quad(residual, 50 * width, np.inf, limit=200)
    return near + far


def conditional_expected_lifetime(alpha: ArrayLike, lam: ArrayLike, a: float) -> float | NDArray[np.float64]:
    """
    E(T | T > a) = E(T) * Q(1 + 1/alpha, lambda a**alpha) * exp(lambda a**alpha).
    From a cumulative hazard of 500 on, where Q nears underflow and exp overflow,
    the mean residual life a + integral of S(a + u) / S(a) is integrated instead.
    """
    if a < 0:
        raise DomainError(f"conditioning time must be nonnegative, got {a}")
    scalar = np.ndim(alpha) == 0 and np.ndim(lam) == 0
    alpha, lam = np.broadcast_arrays(np.atleast_1d(alpha).astype(float), np.atleast_1d(lam).astype(float))
    hazard = lam * a**alpha
    out = np.empty(hazard.shape)
    closed = hazard < _TAIL_HAZARD
    h = hazard[closed]
    out[closed] = expected_lifetime(alpha[closed], lam[closed]) * gammaincc(1 + 1 / alpha[closed], h) * np.exp(h)
    for index in zip(*np.nonzero(~closed)):
        out[index] = a + _residual_tail(float(alpha[index]), float(hazard[index]), a)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BFHyper:
    """GA(d1, d2) on alpha* and GA(d3, d4) on lambda*, first argument a rate, second a shape."""

    d1: float
    d2: float
    d3: float
    d4: float

    def __post_init__(self):
        for name in ("d1", "d2", "d3", "d4"):
            object.__setattr__(self, name, require_positive(name, getattr(self, name)))

    @classmethod
    def matching(cls, p: PriorSpec) -> "BFHyper":
        return cls(d1=p.c1, d2=p.c2, d3=p.gd.b, d4=p.gd.a)

    def matches(self, p: PriorSpec) -> bool:
        pairs = ((self.d1, p.c1), (self.d2, p.c2), (self.d3, p.gd.b), (self.d4, p.gd.a))
        return all(math.isclose(x, y, rel_tol=1e-12) for x, y in pairs)


BFMode = Literal["closed", "numeric"]


def _require_complete(d: CompetingRisksDataset, what: str) -> None:
    if d.scheme.kind is not SchemeKind.COMPLETE or d.n_star != d.n:
        raise InvalidInputError(f"{what} needs complete data, got {d.scheme}")


def _log_shape_integral(d: CompetingRisksDataset, a: float, b: float, c1: float, c2: float) -> float:
    """log of the integral over alpha of alpha**(n+c2-1) e**(-c1 alpha) prod(t)**(alpha-1) (b + D)**-(n+a)."""
    target = AlphaMarginal(d.stats, a, b, c1, c2)
    mode = find_alpha_mode(target)
    peak = target(mode)

    def integrand(x: float) -> float:
        return math.exp(target(x) - peak) if x > 0 else 0.0

    left, _ = quad(integrand, 0.0, mode, limit=200)
    right, _ = quad(integrand, mode, np.inf, limit=200)
    return peak + math.log(left + right)


def log_bayes_factor(
    d: CompetingRisksDataset, p: PriorSpec, h0: BFHyper, mode: BFMode = "closed"
) -> float:
    """
    ln BF for H0: lambda1 = lambda2 (pooled Weibull) against the full model.
    Low values reject H0. The closed form needs d1 = c1, d2 = c2, d3 = b, d4 = a,
    under which the shape integrals of both marginal likelihoods coincide; the
    numeric mode evaluates them by quadrature for any hyperparameters.
    """
    _require_complete(d, "the Bayes factor")
    n = d.n
    g = p.gd
    counts = d.counts
    pooled = h0.d4 * math.log(h0.d3) + gammaln(n + h0.d4) - gammaln(h0.d4)
    full = (
        g.a * math.log(g.b)
        + gammaln(g.abar)
        + sum(gammaln(k + s) - gammaln(s) for k, s in zip(counts, g.shapes))
        + gammaln(n + g.a)
        - gammaln(g.a)
        - gammaln(n + g.abar)
    )
    shape_priors = (h0.d2 * math.log(h0.d1) - gammaln(h0.d2)) - (p.c2 * math.log(p.c1) - gammaln(p.c2))
    log_bf = float(pooled - full + shape_priors)
    match mode:
        case "closed":
            if not h0.matches(p):
                raise HyperMismatchError(
                    "closed-form Bayes factor requires d1=c1, d2=c2, d3=b, d4=a "
                    f"(got d=({h0.d1:g}, {h0.d2:g}, {h0.d3:g}, {h0.d4:g}), "
                    f"c1={p.c1:g}, c2={p.c2:g}, b={g.b:g}, a={g.a:g}); use the numeric mode otherwise"
                )
        case "numeric":
            log_bf += _log_shape_integral(d, h0.d4, h0.d3, h0.d1, h0.d2) - _log_shape_integral(
                d, g.a, g.b, p.c1, p.c2
            )
        case _:
            raise InvalidInputError(f"unknown Bayes factor mode {mode!r}; expected 'closed' or 'numeric'")
    logger.info(f"ln BF = {log_bf:.6f} (log10 BF = {log_bf / math.log(10):.4f}) from counts {counts}")
    return log_bf


def bayes_factor_reading(log_bf: float) -> str:
    if log_bf < 0:
        return "BF < 1: the data favour different risks for the two causes (reject H0: lambda1 = lambda2)"
    return "BF >= 1: no evidence that the two causes differ (do not reject H0: lambda1 = lambda2)"


def fitted_min_cdf(t: ArrayLike, report: EstimateReport | WeibullParams) -> float | NDArray[np.float64]:
    """1 - exp(-(lambda0 + lambda1 + lambda2) t**alpha) at the Bayes estimates."""
    w = report.min_lifetime if isinstance(report, EstimateReport) else report
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError(f"t must be nonnegative, got {t!r}")
    with np.errstate(divide="ignore"):
        out = -np.expm1(-w.scale * np.exp(w.shape * np.log(t)))
    return float(out) if out.ndim == 0 else out


class KSResult(NamedTuple):
    statistic: float
    p_value: float
    n: int


class EmpiricalJumps(NamedTuple):
    t: NDArray[np.float64]
    before: NDArray[np.float64]
    after: NDArray[np.float64]


def empirical_jumps(times: ArrayLike) -> EmpiricalJumps:
    """Distinct times with the empirical CDF just before and at each jump; ties share one jump."""
    t, counts = np.unique(np.asarray(times, dtype=float), return_counts=True)
    after = np.cumsum(counts) / counts.sum()
    before = np.concatenate([[0.0], after[:-1]])
    return EmpiricalJumps(t, before, after)


def ks_test(
    d: CompetingRisksDataset,
    cdf: Callable[[NDArray[np.float64]], ArrayLike],
    method: Literal["asymptotic", "exact"] = "exact",
) -> KSResult:
    """
    One-sample Kolmogorov-Smirnov test of the observed failure times against `cdf`.
    The p-value ignores that `cdf` was fitted to the same data.
    """
    if d.n_star < 1:
        raise InsufficientSampleError("the KS test needs at least one observed failure")
    jumps = empirical_jumps(d.times)
    fitted = np.asarray(cdf(jumps.t), dtype=float)
    statistic = float(max(np.max(np.abs(fitted - jumps.before)), np.max(np.abs(jumps.after - fitted))))
    n = d.n_star
    match method:
        case "asymptotic":
            p_value = float(kolmogorov(math.sqrt(n) * statistic))
        case "exact":
            p_value = float(kstwo.sf(statistic, n))
        case _:
            raise InvalidInputError(f"unknown KS method {method!r}; expected 'asymptotic' or 'exact'")
    return KSResult(statistic, min(max(p_value, 0.0), 1.0), n)


@dataclass(frozen=True, eq=False)
class PooledFit:
    """Posterior draws and means of (alpha*, lambda*) for the pooled Weibull model."""

    alpha_draws: NDArray[np.float64]
    lambda_draws: NDArray[np.float64]

    @property
    def alpha(self) -> float:
        return float(self.alpha_draws.mean())

    @property
    def lam(self) -> float:
        return float(self.lambda_draws.mean())

    @property
    def params(self) -> WeibullParams:
        return WeibullParams(self.alpha, self.lam)


def pooled_weibull_fit(
    d: CompetingRisksDataset,
    hypers: BFHyper,
    rng: np.random.Generator,
    M: int,
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION,
) -> PooledFit:
    """
    Fits the single Weibull of H0 by composition: alpha* from its log-concave marginal,
    then lambda* | alpha* ~ Gamma(n + d4, rate d3 + sum(t**alpha*)).
    """
    _require_complete(d, "the pooled Weibull fit")
    if int(M) != M or M < 1:
        raise InvalidInputError(f"number of draws must be a positive integer, got {M}")
    target = AlphaMarginal(d.stats, a=hypers.d4, b=hypers.d3, c1=hypers.d1, c2=hypers.d2)
    alpha = make_alpha_sampler(target, method).sample(rng, int(M))
    rate = hypers.d3 + d.stats.exposure(alpha)
    lam = rng.gamma(d.n + hypers.d4, 1.0, size=int(M)) / rate
    fit = PooledFit(alpha, lam)
    logger.info(f"pooled Weibull fit: alpha* = {fit.alpha:.4f}, lambda* = {fit.lam:.4f}")
    return fit
