"""
Weibull, Marshall-Olkin bivariate Weibull (MOBW), Gamma-Dirichlet (GD) and
partially ordered Gamma-Dirichlet (POGD) laws.

Every Weibull in this package uses the rate parameterization

    S(u) = exp(-lambda * u**alpha),    f(u) = alpha * lambda * u**(alpha - 1) * S(u),

so `scale` is a rate, not a characteristic life. Densities are exposed in log
space only and u**alpha is always evaluated as exp(alpha * log(u)).
"""

from dataclasses import dataclass
from typing import overload

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from .base import DomainError, InvalidInputError, require_positive

FloatOrArray = float | NDArray[np.float64]


@dataclass(frozen=True)
class WeibullParams:
    shape: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "shape", require_positive("shape", self.shape))
        object.__setattr__(self, "scale", require_positive("scale", self.scale))


@dataclass(frozen=True)
class MOBWParams:
    """Shape alpha shared by U0, U1, U2 and their rates lambda0, lambda1, lambda2."""

    shape: float
    lambda0: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for field in ("shape", "lambda0", "lambda1", "lambda2"):
            object.__setattr__(self, field, require_positive(field, getattr(self, field)))

    @property
    def lambda_total(self) -> float:
        return self.lambda0 + self.lambda1 + self.lambda2

    def as_array(self) -> NDArray[np.float64]:
        """(alpha, lambda0, lambda1, lambda2) in the package-wide parameter order."""
        return np.array([self.shape, self.lambda0, self.lambda1, self.lambda2])


@dataclass(frozen=True)
class GDParams:
    """Hyperparameters of GD(a, b, a0, a1, a2); b is a rate."""

    a: float
    b: float
    a0: float
    a1: float
    a2: float

    def __post_init__(self):
        for field in ("a", "b", "a0", "a1", "a2"):
            object.__setattr__(self, field, require_positive(field, getattr(self, field)))

    @property
    def abar(self) -> float:
        return self.a0 + self.a1 + self.a2

    @property
    def shapes(self) -> tuple[float, float, float]:
        return (self.a0, self.a1, self.a2)


@dataclass(frozen=True)
class ScaleTriple:
    lambda0: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for field in ("lambda0", "lambda1", "lambda2"):
            value = float(getattr(self, field))
            if not value >= 0:
                raise InvalidInputError(f"{field} must be nonnegative, got {value}")
            object.__setattr__(self, field, value)

    @property
    def total(self) -> float:
        return self.lambda0 + self.lambda1 + self.lambda2

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.lambda0, self.lambda1, self.lambda2])


def _as_positive_array(name: str, x: ArrayLike, allow_zero: bool = False) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    bad = arr < 0 if allow_zero else arr <= 0
    if np.any(bad | np.isnan(arr)):
        bound = "nonnegative" if allow_zero else "positive"
        raise DomainError(f"{name} must be {bound}, got {x!r}")
    return arr


def _unwrap(arr: NDArray[np.float64]) -> FloatOrArray:
    return float(arr) if arr.ndim == 0 else arr


def _power(t: NDArray[np.float64], alpha: float) -> NDArray[np.float64]:
    # t**alpha as exp(alpha * log t); t == 0 maps to 0
    with np.errstate(divide="ignore"):
        return np.exp(alpha * np.log(t))


def weibull_log_pdf(t: ArrayLike, p: WeibullParams) -> FloatOrArray:
    t = _as_positive_array("t", t)
    log_t = np.log(t)
    out = (
        np.log(p.shape)
        + np.log(p.scale)
        + (p.shape - 1.0) * log_t
        - p.scale * np.exp(p.shape * log_t)
    )
    return _unwrap(out)


def weibull_log_survival(t: ArrayLike, p: WeibullParams) -> FloatOrArray:
    t = _as_positive_array("t", t, allow_zero=True)
    return _unwrap(-p.scale * _power(t, p.shape))


def weibull_survival(t: ArrayLike, p: WeibullParams) -> FloatOrArray:
    return _unwrap(np.exp(weibull_log_survival(t, p)))


def mobw_log_surv(x1: ArrayLike, x2: ArrayLike, p: MOBWParams) -> FloatOrArray:
    """Log joint survival P(X1 > x1, X2 > x2); the three branches meet on the diagonal."""
    x1 = _as_positive_array("x1", x1, allow_zero=True)
    x2 = _as_positive_array("x2", x2, allow_zero=True)
    x1, x2 = np.broadcast_arrays(x1, x2)
    a = p.shape
    below = -p.lambda1 * _power(x1, a) - (p.lambda0 + p.lambda2) * _power(x2, a)
    above = -(p.lambda0 + p.lambda1) * _power(x1, a) - p.lambda2 * _power(x2, a)
    diagonal = -p.lambda_total * _power(x1, a)
    out = np.where(x1 < x2, below, np.where(x1 > x2, above, diagonal))
    return _unwrap(out)


def mobw_log_density(x1: ArrayLike, x2: ArrayLike, p: MOBWParams) -> FloatOrArray:
    """
    Log of f1 (x1 < x2), f2 (x1 > x2) or of the singular component f0 on the diagonal.

    f0(x, x) = (lambda0 / lambda) * f_WE(x; alpha, lambda) is a density with
    respect to length along the diagonal, not with respect to area.
    """
    x1 = _as_positive_array("x1", x1)
    x2 = _as_positive_array("x2", x2)
    x1, x2 = np.broadcast_arrays(x1, x2)
    a = p.shape
    f1 = weibull_log_pdf(x1, WeibullParams(a, p.lambda1)) + weibull_log_pdf(
        x2, WeibullParams(a, p.lambda0 + p.lambda2)
    )
    f2 = weibull_log_pdf(x1, WeibullParams(a, p.lambda0 + p.lambda1)) + weibull_log_pdf(
        x2, WeibullParams(a, p.lambda2)
    )
    f0 = np.log(p.lambda0 / p.lambda_total) + weibull_log_pdf(
        x1, WeibullParams(a, p.lambda_total)
    )
    out = np.where(x1 < x2, f1, np.where(x1 > x2, f2, f0))
    return _unwrap(np.asarray(out, dtype=float))


@overload
def sample_mobw(rng: np.random.Generator, p: MOBWParams) -> tuple[float, int]: ...
@overload
def sample_mobw(
    rng: np.random.Generator, p: MOBWParams, size: int
) -> tuple[NDArray[np.float64], NDArray[np.int64]]: ...


def sample_mobw(rng, p, size=None):
    """
    Draws (T, cause) with T = min(X1, X2).

    cause is 0 when U0 is not beaten by U1 or U2 (ties go to 0), otherwise 1 when
    U1 < U2 and 2 when U2 < U1.
    """
    shape = (3,) if size is None else (3, size)
    rates = np.array([p.lambda0, p.lambda1, p.lambda2]).reshape((3,) + (1,) * (len(shape) - 1))
    # rng.weibull has S(x) = exp(-x**alpha); dividing by rate**(1/alpha) gives rate `rate`
    u = rng.weibull(p.shape, size=shape) / rates ** (1.0 / p.shape)
    u0, u1, u2 = u
    time = np.minimum(u0, np.minimum(u1, u2))
    cause = np.where(u0 <= np.minimum(u1, u2), 0, np.where(u1 < u2, 1, 2))
    if size is None:
        return float(time), int(cause)
    return time, cause.astype(np.int64)


def draw_gd(
    rng: np.random.Generator,
    a: float,
    rate: ArrayLike,
    shapes: tuple[float, float, float],
    size: int,
) -> NDArray[np.float64]:
    """
    `size` draws of GD(a, rate, *shapes) as a (size, 3) array.

    The total is Gamma(a, rate) and the split is an independent Dirichlet(shapes).
    `rate` may be a scalar or an array of per-draw rates.
    """
    rate = np.broadcast_to(np.asarray(rate, dtype=float), (size,))
    totals = rng.gamma(a, 1.0, size=size) / rate
    splits = rng.dirichlet(shapes, size=size)
    return totals[:, None] * splits


def draw_pogd(
    rng: np.random.Generator,
    a: float,
    rate: ArrayLike,
    shapes: tuple[float, float, float],
    size: int,
) -> NDArray[np.float64]:
    """GD draws with the last two columns swapped where needed so lambda1 <= lambda2."""
    draws = draw_gd(rng, a, rate, shapes, size)
    draws[:, 1:] = np.sort(draws[:, 1:], axis=1)
    return draws


def sample_gd(rng: np.random.Generator, g: GDParams) -> ScaleTriple:
    return ScaleTriple(*draw_gd(rng, g.a, g.b, g.shapes, 1)[0])


def sample_pogd(rng: np.random.Generator, g: GDParams) -> ScaleTriple:
    return ScaleTriple(*draw_pogd(rng, g.a, g.b, g.shapes, 1)[0])


def _scale_columns(t: ScaleTriple | ArrayLike) -> tuple[NDArray[np.float64], ...]:
    arr = t.as_array() if isinstance(t, ScaleTriple) else np.asarray(t, dtype=float)
    if arr.shape[-1] != 3:
        raise InvalidInputError(f"expected a scale triple, got shape {arr.shape}")
    if np.any(~(arr > 0)):
        raise DomainError(f"scale components must be positive, got {arr!r}")
    return arr[..., 0], arr[..., 1], arr[..., 2]


def _gd_log_kernel(l0, l1, l2, g: GDParams) -> NDArray[np.float64]:
    lam = l0 + l1 + l2
    out = gammaln(g.abar) - gammaln(g.a) + (g.a - g.abar) * np.log(g.b * lam)
    for shape, value in zip(g.shapes, (l0, l1, l2)):
        out = out + shape * np.log(g.b) - gammaln(shape) + (shape - 1.0) * np.log(value) - g.b * value
    return out


def gd_log_pdf(t: ScaleTriple | ArrayLike, g: GDParams) -> FloatOrArray:
    l0, l1, l2 = _scale_columns(t)
    return _unwrap(np.asarray(_gd_log_kernel(l0, l1, l2, g)))


def pogd_log_pdf(t: ScaleTriple | ArrayLike, g: GDParams) -> FloatOrArray:
    """POGD density: the GD density plus its image under swapping lambda1 and lambda2."""
    l0, l1, l2 = _scale_columns(t)
    if np.any(l1 > l2):
        raise DomainError("POGD support requires lambda1 <= lambda2")
    out = np.logaddexp(_gd_log_kernel(l0, l1, l2, g), _gd_log_kernel(l0, l2, l1, g))
    return _unwrap(np.asarray(out))
