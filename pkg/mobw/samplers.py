"""
Posterior simulation for the MOBW competing-risks model.

The posterior factors as pi1(alpha) * pi2(lambda0, lambda1, lambda2 | alpha), where
pi1 is log-concave and pi2 is Gamma-Dirichlet. Drawing alpha from pi1 and then the
scales from pi2 yields independent draws, so no burn-in or thinning applies.
The order-restricted posterior (lambda1 <= lambda2) is reached by importance
sampling from a POGD proposal.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from .base import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .base import BracketError, DomainError, InvalidInputError, require_positive
from .data import CompetingRisksDataset, SufficientStats
from .distributions import GDParams, ScaleTriple, draw_gd, draw_pogd

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("alpha", "lambda0", "lambda1", "lambda2")

ESS_WARNING_FRACTION = 0.05
MODE_SEARCH_LOWER = 1e-3
MAX_DOUBLINGS = 60


@dataclass(frozen=True)
class PriorSpec:
    """GD(a, b, a0, a1, a2) on the scales and GA(c1, c2) on alpha, with c1 a rate and c2 a shape."""

    gd: GDParams
    c1: float
    c2: float

    def __post_init__(self):
        object.__setattr__(self, "c1", require_positive("c1", self.c1))
        object.__setattr__(self, "c2", require_positive("c2", self.c2))

    @classmethod
    def default(cls) -> "PriorSpec":
        return cls(GDParams(a=0.001, b=0.001, a0=1.0, a1=1.0, a2=1.0), c1=0.001, c2=0.001)


@dataclass(frozen=True)
class PosteriorDraw:
    alpha: float
    scales: ScaleTriple

    def __post_init__(self):
        object.__setattr__(self, "alpha", require_positive("alpha", self.alpha))


class AlphaMethod(StrEnum):
    ADAPTIVE_REJECTION = "adaptive-rejection"
    RATIO_OF_UNIFORMS = "ratio-of-uniforms"


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """
    M posterior draws stored column-wise: `alpha` is (M,), `scales` is (M, 3).
    Weights are normalized on construction; None means uniform.
    """

    alpha: NDArray[np.float64]
    scales: NDArray[np.float64]
    weights: NDArray[np.float64] | None = None
    restricted: bool = False
    log_weights: NDArray[np.float64] | None = field(default=None, repr=False)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        scales = np.asarray(self.scales, dtype=float).reshape(-1, 3)
        if alpha.size == 0 or alpha.size != scales.shape[0]:
            raise InvalidInputError(
                f"expected matching non-empty alpha and scale columns, got {alpha.size} and {scales.shape[0]}"
            )
        if self.weights is None:
            weights = np.full(alpha.size, 1.0 / alpha.size)
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if weights.shape != alpha.shape:
                raise InvalidInputError("weights must have one entry per draw")
            if np.any(~np.isfinite(weights)) or np.any(weights < 0) or not weights.sum() > 0:
                raise InvalidInputError("weights must be finite, nonnegative and not all zero")
            weights = weights / weights.sum()
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)

    @property
    def M(self) -> int:
        return int(self.alpha.size)

    @property
    def values(self) -> NDArray[np.float64]:
        """(M, 4) array in PARAMETER_NAMES order."""
        return np.column_stack([self.alpha, self.scales])

    def column(self, name: str) -> NDArray[np.float64]:
        try:
            return self.values[:, PARAMETER_NAMES.index(name)]
        except ValueError:
            raise InvalidInputError(f"unknown parameter {name!r}; expected one of {PARAMETER_NAMES}") from None

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weights)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    @property
    def draws(self) -> list[PosteriorDraw]:
        return [PosteriorDraw(float(a), ScaleTriple(*s)) for a, s in zip(self.alpha, self.scales)]


class AlphaMarginal:
    """
    log pi1(alpha) up to an additive constant:

        -c1*alpha + (n* + c2 - 1)*log(alpha) - (a + n*)*log(b + D(alpha)) + (alpha - 1)*sum(log t)
    """

    def __init__(self, stats: SufficientStats, a: float, b: float, c1: float, c2: float):
        if stats.n_star < 1:
            raise InvalidInputError("the shape marginal needs at least one observed failure")
        self.stats = stats
        self.c1 = c1
        self.log_alpha_coef = stats.n_star + c2 - 1.0
        self.exposure_coef = a + stats.n_star
        self.log_b = np.log(b)

    @classmethod
    def from_dataset(cls, d: CompetingRisksDataset, p: PriorSpec) -> "AlphaMarginal":
        return cls(d.stats, p.gd.a, p.gd.b, p.c1, p.c2)

    def _log_b_plus_exposure(self, alpha: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.logaddexp(self.log_b, self.stats.log_exposure(alpha))

    def __call__(self, alpha: ArrayLike) -> float | NDArray[np.float64]:
        alpha = np.asarray(alpha, dtype=float)
        with np.errstate(divide="ignore"):
            out = (
                -self.c1 * alpha
                + self.log_alpha_coef * np.log(alpha)
                - self.exposure_coef * self._log_b_plus_exposure(alpha)
                + (alpha - 1.0) * self.stats.sum_log_times
            )
        return float(out) if out.ndim == 0 else out

    def slope(self, alpha: ArrayLike) -> float | NDArray[np.float64]:
        """d/dalpha of the log density; D'/(b + D) = D/(b + D) * dlogD/dalpha."""
        alpha = np.asarray(alpha, dtype=float)
        share = np.exp(self.stats.log_exposure(alpha) - self._log_b_plus_exposure(alpha))
        out = (
            -self.c1
            + self.log_alpha_coef / alpha
            - self.exposure_coef * share * self.stats.log_exposure_slope(alpha)
            + self.stats.sum_log_times
        )
        return float(out) if np.ndim(out) == 0 else out

    def spread(self, mode: float) -> float:
        """1/sqrt(-curvature) at the mode; falls back to mode/2 where curvature is not negative."""
        step = 1e-4 * mode
        curvature = (self.slope(mode + step) - self.slope(mode - step)) / (2 * step)
        return float(1.0 / np.sqrt(-curvature)) if curvature < 0 else 0.5 * mode


def log_alpha_marginal(alpha: float, d: CompetingRisksDataset, p: PriorSpec) -> float:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return AlphaMarginal.from_dataset(d, p)(alpha)


def find_alpha_mode(target: AlphaMarginal) -> float:
    """
    Maximizes the log-concave marginal with a bounded golden-section/Brent search on
    [lower, upper]; `upper` doubles from 1 until the density is decreasing there.
    """
    lower = MODE_SEARCH_LOWER
    for _ in range(MAX_DOUBLINGS):
        if target.slope(lower) > 0:
            break
        lower /= 10.0
    else:
        raise BracketError("the shape marginal is decreasing down to alpha = 0")
    upper = 1.0
    for _ in range(MAX_DOUBLINGS):
        if upper > lower and target.slope(upper) < 0:
            break
        upper *= 2.0
    else:
        raise BracketError(f"the shape marginal is still increasing at alpha = {upper:g}")
    result = minimize_scalar(
        lambda x: -target(x), bounds=(lower, upper), method="bounded", options={"xatol": 1e-10 * upper}
    )
    if not result.success:
        raise BracketError(f"mode search failed: {result.message}")
    logger.debug(f"alpha mode {result.x:.6g} in [{lower:g}, {upper:g}] after {result.nfev} evaluations")
    return float(result.x)


def _initial_abscissae(target: AlphaMarginal) -> NDArray[np.float64]:
    mode = find_alpha_mode(target)
    sd = target.spread(mode)
    left = mode - 2 * sd if mode - 2 * sd > 0 else 0.5 * mode
    right = mode + 2 * sd
    for _ in range(MAX_DOUBLINGS):
        if target.slope(left) > 0:
            break
        left *= 0.5
    for _ in range(MAX_DOUBLINGS):
        if target.slope(right) < 0:
            break
        right += 2 * sd
    return np.array([left, mode, right])


class AdaptiveRejectionSampler:
    """
    Adaptive rejection sampling for a log-concave density on (lower, inf).

    The envelope is the piecewise-exponential upper hull built from tangents at
    the abscissae; chords between neighbouring abscissae give the squeeze. Every
    point where the density had to be evaluated and the candidate was rejected is
    added to the abscissae, up to `max_points`. The sampler mutates its envelope,
    so each instance belongs to a single thread.
    """

    def __init__(
        self,
        log_density: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        slope: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        abscissae: ArrayLike,
        lower: float = 0.0,
        max_points: int = 50,
    ):
        self.log_density = log_density
        self.slope = slope
        self.lower = lower
        self.max_points = max_points
        x = np.unique(np.asarray(abscissae, dtype=float))
        self._x = x
        self._h = np.asarray(log_density(x), dtype=float)
        self._dh = np.asarray(slope(x), dtype=float)
        if not self._dh[0] > 0 or not self._dh[-1] < 0:
            raise BracketError("abscissae must straddle the mode of the target density")
        self.evaluations = x.size
        self._update()

    @classmethod
    def for_marginal(cls, target: AlphaMarginal, **kwargs) -> "AdaptiveRejectionSampler":
        return cls(target, target.slope, _initial_abscissae(target), **kwargs)

    @property
    def abscissae(self) -> NDArray[np.float64]:
        return self._x

    def _update(self) -> None:
        x, h, dh = self._x, self._h, self._dh
        gap = dh[:-1] - dh[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (h[1:] - h[:-1] - x[1:] * dh[1:] + x[:-1] * dh[:-1]) / gap
        z = np.where(gap > 1e-12, z, 0.5 * (x[:-1] + x[1:]))
        z = np.clip(z, x[:-1], x[1:])
        self._z = np.concatenate([[self.lower], z, [np.inf]])
        lo, hi = self._z[:-1], self._z[1:]
        width = hi - lo
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            u_lo = h + dh * (lo - x)
            u_hi = h + dh * (hi - x)
            rising = u_hi + np.log(-np.expm1(-dh * width)) - np.log(dh)
            falling = u_lo + np.log(-np.expm1(dh * width)) - np.log(-dh)
            flat = u_lo + np.log(width)
        self._log_mass = np.where(dh > 1e-12, rising, np.where(dh < -1e-12, falling, flat))
        self._probs = np.exp(self._log_mass - logsumexp(self._log_mass))

    def _propose(self, rng: np.random.Generator, size: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        piece = rng.choice(self._x.size, size=size, p=self._probs)
        v = rng.random(size)
        slope = self._dh[piece]
        lo, hi = self._z[piece], self._z[piece + 1]
        width = hi - lo
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            rising = hi + np.log1p((1.0 - v) * np.expm1(-slope * width)) / slope
            falling = lo + np.log1p(v * np.expm1(slope * width)) / slope
            flat = lo + v * width
        x = np.where(slope > 1e-12, rising, np.where(slope < -1e-12, falling, flat))
        x = np.clip(x, lo, hi)
        upper = self._h[piece] + slope * (x - self._x[piece])
        return x, upper

    def _squeeze(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        xs, h = self._x, self._h
        i = np.searchsorted(xs, x, side="right") - 1
        inside = (i >= 0) & (i < xs.size - 1)
        j = np.clip(i, 0, xs.size - 2)
        chord = ((xs[j + 1] - x) * h[j] + (x - xs[j]) * h[j + 1]) / (xs[j + 1] - xs[j])
        return np.where(inside, chord, -np.inf)

    def _insert(self, x: NDArray[np.float64], h: NDArray[np.float64]) -> None:
        room = self.max_points - self._x.size
        if room <= 0 or x.size == 0:
            return
        x, first = np.unique(x, return_index=True)
        new = ~np.isin(x, self._x)
        x, h = x[new][:room], h[first][new][:room]
        if x.size == 0:
            return
        dh = np.asarray(self.slope(x), dtype=float).reshape(-1)
        order = np.argsort(np.concatenate([self._x, x]))
        self._x = np.concatenate([self._x, x])[order]
        self._h = np.concatenate([self._h, h])[order]
        self._dh = np.concatenate([self._dh, dh])[order]
        self._update()

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        out = np.empty(size)
        filled = 0
        proposed = 0
        while filled < size:
            want = size - filled
            x, upper = self._propose(rng, want)
            proposed += want
            log_w = np.log(rng.random(want))
            accept = log_w <= self._squeeze(x) - upper
            pending = np.flatnonzero(~accept)
            if pending.size:
                h = np.asarray(self.log_density(x[pending]), dtype=float).reshape(-1)
                self.evaluations += pending.size
                passed = log_w[pending] <= h - upper[pending]
                accept[pending[passed]] = True
                self._insert(x[pending[~passed]], h[~passed])
            taken = x[accept]
            out[filled : filled + taken.size] = taken
            filled += taken.size
        logger.debug(
            f"adaptive rejection: {size} draws from {proposed} proposals, "
            f"{self._x.size} abscissae, {self.evaluations} density evaluations"
        )
        return out


class RatioOfUniformsSampler:
    """
    Ratio-of-uniforms relocated to the mode m: with (u, v) uniform on
    [0, 1] x [v_minus, v_plus], x = m + v/u is accepted when u**2 <= f(x)/f(m).
    """

    def __init__(self, target: AlphaMarginal):
        self.target = target
        self.mode = find_alpha_mode(target)
        self.log_peak = target(self.mode)
        self.v_minus = -self._bound(left=True)
        self.v_plus = self._bound(left=False)

    def _bound(self, left: bool) -> float:
        m, target = self.mode, self.target
        sign = -1.0 if left else 1.0

        def negative_log_edge(y: float) -> float:
            return -(np.log(y) + 0.5 * (target(m + sign * y) - self.log_peak))

        if left:
            upper = m
        else:
            upper = max(m, 1.0)
            for _ in range(MAX_DOUBLINGS):
                if 1.0 / upper + 0.5 * target.slope(m + upper) < 0:
                    break
                upper *= 2.0
            else:
                raise BracketError("cannot bound the ratio-of-uniforms region")
        result = minimize_scalar(negative_log_edge, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-10})
        return float(np.exp(-result.fun))

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        out = np.empty(size)
        filled = 0
        proposed = 0
        while filled < size:
            want = max(2 * (size - filled), 16)
            u = 1.0 - rng.random(want)
            v = self.v_minus + (self.v_plus - self.v_minus) * rng.random(want)
            x = self.mode + v / u
            proposed += want
            ok = x > 0
            accept = np.zeros(want, dtype=bool)
            accept[ok] = 2.0 * np.log(u[ok]) <= self.target(x[ok]) - self.log_peak
            taken = x[accept][: size - filled]
            out[filled : filled + taken.size] = taken
            filled += taken.size
        logger.debug(f"ratio-of-uniforms: {size} draws from {proposed} proposals")
        return out


def make_alpha_sampler(
    target: AlphaMarginal, method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION
) -> AdaptiveRejectionSampler | RatioOfUniformsSampler:
    try:
        method = AlphaMethod(method)
    except ValueError:
        raise InvalidInputError(
            f"unknown alpha sampler {method!r}; expected one of {', '.join(m.value for m in AlphaMethod)}"
        ) from None
    if method is AlphaMethod.RATIO_OF_UNIFORMS:
        return RatioOfUniformsSampler(target)
    return AdaptiveRejectionSampler.for_marginal(target)


def sample_alpha(
    rng: np.random.Generator,
    d: CompetingRisksDataset,
    p: PriorSpec,
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION,
    size: int | None = None,
) -> float | NDArray[np.float64]:
    """Exact draw(s) from pi1(alpha)."""
    sampler = make_alpha_sampler(AlphaMarginal.from_dataset(d, p), method)
    draws = sampler.sample(rng, 1 if size is None else size)
    return float(draws[0]) if size is None else draws


def _check_draws(M: int) -> int:
    if int(M) != M or M < 1:
        raise InvalidInputError(f"number of draws must be a positive integer, got {M}")
    return int(M)


def _conditional_rates(stats: SufficientStats, b: float, alpha: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.exp(np.logaddexp(np.log(b), stats.log_exposure(alpha)))


def sample_posterior_unrestricted(
    rng: np.random.Generator,
    d: CompetingRisksDataset,
    p: PriorSpec,
    M: int,
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION,
) -> WeightedSample:
    """alpha from pi1, then the scales from GD(a+n*, b+D(alpha), a0+n0, a1+n1, a2+n2)."""
    M = _check_draws(M)
    stats = d.stats
    alpha = sample_alpha(rng, d, p, method, size=M)
    g = p.gd
    shapes = (g.a0 + stats.n0, g.a1 + stats.n1, g.a2 + stats.n2)
    scales = draw_gd(rng, g.a + stats.n_star, _conditional_rates(stats, g.b, alpha), shapes, M)
    return WeightedSample(alpha, scales)


def log_importance_weights(scales: ArrayLike, counts: tuple[int, int, int]) -> NDArray[np.float64]:
    """log h = n* log(lambda) - n0 log(lambda0) - n2 log(lambda1) - n1 log(lambda2), row-wise."""
    scales = np.asarray(scales, dtype=float).reshape(-1, 3)
    if np.any(~(scales > 0)):
        raise DomainError("importance weights need positive scale components")
    n0, n1, n2 = counts
    log_l = np.log(scales)
    total = np.log(scales.sum(axis=1))
    return (n0 + n1 + n2) * total - n0 * log_l[:, 0] - n2 * log_l[:, 1] - n1 * log_l[:, 2]


def importance_weight(draw: PosteriorDraw, d: CompetingRisksDataset) -> float:
    return float(np.exp(log_importance_weights(draw.scales.as_array(), d.counts)[0]))


def effective_sample_size(weights: ArrayLike) -> float:
    """Kish effective sample size 1 / sum(w**2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return float(1.0 / np.sum(w * w))


def sample_posterior_restricted(
    rng: np.random.Generator,
    d: CompetingRisksDataset,
    p: PriorSpec,
    M: int,
    method: AlphaMethod = AlphaMethod.ADAPTIVE_REJECTION,
) -> WeightedSample:
    """
    Importance sampling of the posterior restricted to lambda1 <= lambda2 with proposal
    alpha ~ pi1 and scales ~ POGD(a+n*, b+D(alpha), a0+2n0, a1+n1+n2, a2+n1+n2).
    """
    M = _check_draws(M)
    stats = d.stats
    alpha = sample_alpha(rng, d, p, method, size=M)
    g = p.gd
    pair = stats.n1 + stats.n2
    shapes = (g.a0 + 2 * stats.n0, g.a1 + pair, g.a2 + pair)
    scales = draw_pogd(rng, g.a + stats.n_star, _conditional_rates(stats, g.b, alpha), shapes, M)
    log_h = log_importance_weights(scales, stats.counts)
    weights = np.exp(log_h - logsumexp(log_h))
    sample = WeightedSample(alpha, scales, weights, restricted=True, log_weights=log_h)
    ess = sample.ess
    if ess < ESS_WARNING_FRACTION * M:
        logger.warning(f"effective sample size {ess:.1f} is below {ESS_WARNING_FRACTION:.0%} of M = {M}")
    else:
        logger.debug(f"effective sample size {ess:.1f} of M = {M}")
    return sample
