"""Weight functions, chaining functions, and event definitions.

Weight functions map outcomes to non-negative emphasis values and are
used by the threshold- and outcome-weighted scores.  Chaining functions
are the non-decreasing transforms whose derivative recovers a weight
function; they drive the threshold-weighted scores.  Both come in
univariate and multivariate flavours.  Multivariate Gaussian weights
are restricted to diagonal covariances, so densities factor into
products of the margins and cdfs into products of marginal cdfs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .exceptions import (
    ContractViolation,
    DimensionMismatch,
    WeightedMassZero,
)
from .forecasts import Ensemble, Parametric

__all__ = [
    "WeightFunction",
    "Constant",
    "IndicatorAbove",
    "IndicatorBelow",
    "GaussPdf",
    "OneMinusGaussPdfRatio",
    "GaussCdf",
    "OneMinusGaussCdf",
    "MvGaussPdf",
    "OneMinusMvGaussPdfRatio",
    "MvGaussCdf",
    "OneMinusMvGaussCdf",
    "BoxIndicator",
    "HeatLevelIndicator",
    "ChainingFunction",
    "Identity",
    "CensorAbove",
    "CensorBelow",
    "GaussCdfChain",
    "GaussCdfComplementChain",
    "GaussPdfChain",
    "GaussPdfRatioComplementChain",
    "CollapseOutside",
    "canonical_chaining",
    "eval_weight",
    "eval_chaining",
    "classify_heat_level",
    "heat_levels",
    "weighted_cdf",
    "MASS_FLOOR",
]

# Forecast mass below this floor counts as zero when normalising.
MASS_FLOOR = 1e-12


def _check_positive_sigma(sigma) -> None:
    if np.any(np.asarray(sigma, dtype=float) <= 0.0):
        raise ContractViolation("sigma must be positive")


# ---------------------------------------------------------------------------
# weight functions
# ---------------------------------------------------------------------------


class WeightFunction:
    """Base class.  Instances are callables returning values in [0, inf).

    ``dim`` is 1 for univariate weights and the vector length for
    multivariate ones.  Univariate weights broadcast over arrays of any
    shape; multivariate weights accept shape (..., dim) and return
    shape (...).
    """

    __slots__ = ()

    @property
    def dim(self) -> int:
        return 1

    @property
    def is_binary(self) -> bool:
        """Whether the weight only takes the values 0 and 1."""
        return False

    def breakpoints(self) -> tuple:
        """Discontinuity locations, used to split quadrature domains."""
        return ()


@dataclass(frozen=True)
class Constant(WeightFunction):
    """w(z) = 1 everywhere (any dimension)."""

    @property
    def is_binary(self) -> bool:
        return True

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.ones(z.shape) if z.ndim else 1.0


@dataclass(frozen=True)
class IndicatorAbove(WeightFunction):
    """w(z) = 1 if z > t else 0."""

    t: float

    @property
    def is_binary(self) -> bool:
        return True

    def breakpoints(self) -> tuple:
        return (self.t,)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = (z > self.t).astype(float)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IndicatorBelow(WeightFunction):
    """w(z) = 1 if z < t else 0."""

    t: float

    @property
    def is_binary(self) -> bool:
        return True

    def breakpoints(self) -> tuple:
        return (self.t,)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = (z < self.t).astype(float)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussPdf(WeightFunction):
    """w(z) = normal density with the given centre and sd.

    Emphasises outcomes near ``mu``.
    """

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def __call__(self, z):
        out = stats.norm.pdf(np.asarray(z, dtype=float), self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OneMinusGaussPdfRatio(WeightFunction):
    """w(z) = 1 - pdf(z) / pdf(mu), zero at the centre, one far out.

    Emphasises both tails at once.
    """

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        peak = stats.norm.pdf(self.mu, self.mu, self.sigma)
        out = 1.0 - stats.norm.pdf(z, self.mu, self.sigma) / peak
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussCdf(WeightFunction):
    """w(z) = normal cdf, a smooth emphasis on the right tail."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def __call__(self, z):
        out = stats.norm.cdf(np.asarray(z, dtype=float), self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OneMinusGaussCdf(WeightFunction):
    """w(z) = 1 - normal cdf, a smooth emphasis on the left tail."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def __call__(self, z):
        out = stats.norm.sf(np.asarray(z, dtype=float), self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


def _mv_params(mu, sigma_diag):
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sigma_diag, dtype=float)
    if mu.ndim != 1 or mu.shape != sd.shape:
        raise DimensionMismatch("mu and sigma_diag must be 1-d arrays of equal length")
    _check_positive_sigma(sd)
    return mu, sd


class _MvWeight(WeightFunction):
    __slots__ = ()

    def _check(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0 or z.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"expected points with last axis {self.dim}, got shape {z.shape}"
            )
        return z


@dataclass(frozen=True)
class MvGaussPdf(_MvWeight):
    """Multivariate normal density with diagonal covariance.

    The density is the product of the marginal densities.
    """

    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self):
        mu, sd = _mv_params(self.mu, self.sigma_diag)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sd)

    @property
    def dim(self) -> int:
        return self.mu.size

    def __call__(self, z):
        z = self._check(z)
        out = np.prod(stats.norm.pdf(z, self.mu, self.sigma_diag), axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OneMinusMvGaussPdfRatio(_MvWeight):
    """1 - density(z) / density(mu) with diagonal covariance."""

    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self):
        mu, sd = _mv_params(self.mu, self.sigma_diag)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sd)

    @property
    def dim(self) -> int:
        return self.mu.size

    def __call__(self, z):
        z = self._check(z)
        peak = np.prod(stats.norm.pdf(self.mu, self.mu, self.sigma_diag))
        out = 1.0 - np.prod(stats.norm.pdf(z, self.mu, self.sigma_diag), axis=-1) / peak
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MvGaussCdf(_MvWeight):
    """Product of marginal normal cdfs (diagonal covariance)."""

    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self):
        mu, sd = _mv_params(self.mu, self.sigma_diag)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sd)

    @property
    def dim(self) -> int:
        return self.mu.size

    def __call__(self, z):
        z = self._check(z)
        out = np.prod(stats.norm.cdf(z, self.mu, self.sigma_diag), axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OneMinusMvGaussCdf(_MvWeight):
    """1 - product of marginal normal cdfs (diagonal covariance)."""

    mu: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self):
        mu, sd = _mv_params(self.mu, self.sigma_diag)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_diag", sd)

    @property
    def dim(self) -> int:
        return self.mu.size

    def __call__(self, z):
        z = self._check(z)
        out = 1.0 - np.prod(stats.norm.cdf(z, self.mu, self.sigma_diag), axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoxIndicator(_MvWeight):
    """w(z) = 1 if lower <= z <= upper componentwise, else 0."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatch("lower and upper must be 1-d arrays of equal length")
        if np.any(lo > hi):
            raise ContractViolation("box must satisfy lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_binary(self) -> bool:
        return True

    def __call__(self, z):
        z = self._check(z)
        inside = np.all((z >= self.lower) & (z <= self.upper), axis=-1)
        out = inside.astype(float)
        return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# heat levels
# ---------------------------------------------------------------------------

# Default thresholds (deg C) for the three-day heat classification:
# warm day at or above the first, hot day at or above the second.
HEAT_WARM = 25.0
HEAT_HOT = 27.0


def heat_levels(temps, warm: float = HEAT_WARM, hot: float = HEAT_HOT):
    """Classify three-day maximum temperature vectors into levels 1-4.

    Level 1: all three days below ``warm``.
    Level 2: one or two days at or above ``warm``.
    Level 3: all days at or above ``warm``, at least one below ``hot``.
    Level 4: all days at or above ``hot``.

    Parameters
    ----------
    temps : array_like
        Shape (..., 3); thresholds are compared with >=.
    warm, hot : float
        Thresholds, ``warm < hot``.

    Returns
    -------
    int array of shape (...), values in {1, 2, 3, 4}.
    """
    if warm >= hot:
        raise ContractViolation("warm threshold must lie below hot threshold")
    t = np.asarray(temps, dtype=float)
    if t.shape[-1] != 3:
        raise DimensionMismatch("heat levels are defined for 3-day vectors")
    n_warm = np.sum(t >= warm, axis=-1)
    all_hot = np.all(t >= hot, axis=-1)
    out = np.ones(t.shape[:-1], dtype=int)
    out[(n_warm >= 1) & (n_warm <= 2)] = 2
    out[(n_warm == 3) & ~all_hot] = 3
    out[all_hot] = 4
    return out


def classify_heat_level(temps, warm: float = HEAT_WARM, hot: float = HEAT_HOT) -> int:
    """Heat level of a single three-day vector.  See ``heat_levels``."""
    t = np.asarray(temps, dtype=float)
    if t.shape != (3,):
        raise DimensionMismatch("expected a vector of exactly 3 daily maxima")
    return int(heat_levels(t, warm, hot))


@dataclass(frozen=True)
class HeatLevelIndicator(_MvWeight):
    """w(z) = 1 when the 3-day vector z falls in the given heat level."""

    level: int
    warm: float = HEAT_WARM
    hot: float = HEAT_HOT

    def __post_init__(self):
        if self.level not in (1, 2, 3, 4):
            raise ContractViolation("heat level must be 1, 2, 3 or 4")
        if self.warm >= self.hot:
            raise ContractViolation("warm threshold must lie below hot threshold")

    @property
    def dim(self) -> int:
        return 3

    @property
    def is_binary(self) -> bool:
        return True

    def __call__(self, z):
        z = self._check(z)
        out = (heat_levels(z, self.warm, self.hot) == self.level).astype(float)
        return float(out) if out.ndim == 0 else out


def eval_weight(w: WeightFunction, z):
    """Evaluate a weight at a single point with dimension checking.

    Weight objects themselves broadcast over arrays; this wrapper is the
    strict entry point that insists the input is one scalar (univariate
    weights) or one d-vector (multivariate weights) and returns a float.
    """
    if not isinstance(w, WeightFunction):
        raise ContractViolation("w must be a WeightFunction")
    z = np.asarray(z, dtype=float)
    if w.dim == 1:
        if z.ndim != 0:
            raise DimensionMismatch(
                f"univariate weight evaluated at input with shape {z.shape}"
            )
    elif z.shape != (w.dim,):
        raise DimensionMismatch(
            f"expected a vector of length {w.dim}, got shape {z.shape}"
        )
    return float(w(z))


# ---------------------------------------------------------------------------
# chaining functions
# ---------------------------------------------------------------------------


class ChainingFunction:
    """Non-decreasing transform v with v' equal to a weight function.

    Univariate chainings implement ``weight()`` returning the weight
    they integrate.  ``transform`` is vectorised.
    """

    __slots__ = ()

    @property
    def dim(self) -> int:
        return 1

    def weight(self) -> WeightFunction:  # pragma: no cover - abstract
        raise NotImplementedError

    def transform(self, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, z):
        return self.transform(z)


@dataclass(frozen=True)
class Identity(ChainingFunction):
    """v(z) = z, the unweighted case."""

    def weight(self) -> WeightFunction:
        return Constant()

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        return float(z) if z.ndim == 0 else z.copy()


@dataclass(frozen=True)
class CensorAbove(ChainingFunction):
    """v(z) = max(z, t); integrates the indicator of z > t."""

    t: float

    def weight(self) -> WeightFunction:
        return IndicatorAbove(self.t)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        out = np.maximum(z, self.t)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CensorBelow(ChainingFunction):
    """v(z) = min(z, t); integrates the indicator of z < t."""

    t: float

    def weight(self) -> WeightFunction:
        return IndicatorBelow(self.t)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        out = np.minimum(z, self.t)
        return float(out) if out.ndim == 0 else out


def _gauss_cdf_antideriv(z, mu, sigma):
    # Antiderivative of the normal cdf:
    # (z - mu) * cdf(z) + sigma^2 * pdf(z).
    return (z - mu) * stats.norm.cdf(z, mu, sigma) + sigma**2 * stats.norm.pdf(
        z, mu, sigma
    )


@dataclass(frozen=True)
class GaussCdfChain(ChainingFunction):
    """Antiderivative of the GaussCdf weight (right-tail emphasis)."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def weight(self) -> WeightFunction:
        return GaussCdf(self.mu, self.sigma)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        out = _gauss_cdf_antideriv(z, self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussCdfComplementChain(ChainingFunction):
    """Antiderivative of 1 - GaussCdf (left-tail emphasis)."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def weight(self) -> WeightFunction:
        return OneMinusGaussCdf(self.mu, self.sigma)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        out = z - _gauss_cdf_antideriv(z, self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussPdfChain(ChainingFunction):
    """Antiderivative of the GaussPdf weight, i.e. the normal cdf."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def weight(self) -> WeightFunction:
        return GaussPdf(self.mu, self.sigma)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        out = stats.norm.cdf(z, self.mu, self.sigma)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussPdfRatioComplementChain(ChainingFunction):
    """Antiderivative of 1 - pdf(z)/pdf(mu) (two-sided tail emphasis)."""

    mu: float
    sigma: float

    def __post_init__(self):
        _check_positive_sigma(self.sigma)

    def weight(self) -> WeightFunction:
        return OneMinusGaussPdfRatio(self.mu, self.sigma)

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        peak = stats.norm.pdf(self.mu, self.mu, self.sigma)
        out = z - stats.norm.cdf(z, self.mu, self.sigma) / peak
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CollapseOutside(ChainingFunction):
    """Multivariate chaining for binary weights.

    v(z) = z where w(z) = 1, and the fixed point ``z0`` where
    w(z) = 0.  Raises if the weight produces anything but 0 or 1.
    """

    w: WeightFunction
    z0: np.ndarray

    def __post_init__(self):
        if not isinstance(self.w, WeightFunction):
            raise ContractViolation("w must be a WeightFunction")
        if not self.w.is_binary:
            raise ContractViolation("CollapseOutside requires a binary weight")
        if not isinstance(self.w, _MvWeight):
            raise ContractViolation(
                "CollapseOutside works on multivariate weights; for univariate "
                "censoring use CensorAbove or CensorBelow"
            )
        z0 = np.asarray(self.z0, dtype=float)
        if z0.ndim != 1 or z0.size != self.w.dim:
            raise DimensionMismatch("z0 must be a vector matching the weight dimension")
        object.__setattr__(self, "z0", z0)

    @property
    def dim(self) -> int:
        return self.z0.size

    def weight(self) -> WeightFunction:
        return self.w

    def transform(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"expected points with last axis {self.dim}, got shape {z.shape}"
            )
        mask = np.asarray(self.w(z), dtype=float)
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ContractViolation("CollapseOutside requires a binary weight")
        return np.where(mask[..., None] == 1.0, z, self.z0)


_CANONICAL = {
    Constant: lambda w: Identity(),
    IndicatorAbove: lambda w: CensorAbove(w.t),
    IndicatorBelow: lambda w: CensorBelow(w.t),
    GaussCdf: lambda w: GaussCdfChain(w.mu, w.sigma),
    OneMinusGaussCdf: lambda w: GaussCdfComplementChain(w.mu, w.sigma),
    GaussPdf: lambda w: GaussPdfChain(w.mu, w.sigma),
    OneMinusGaussPdfRatio: lambda w: GaussPdfRatioComplementChain(w.mu, w.sigma),
}


def canonical_chaining(w: WeightFunction, z0=None) -> ChainingFunction:
    """The chaining function whose derivative is ``w``.

    Univariate weight families map to their closed-form antiderivatives.
    Binary multivariate weights map to ``CollapseOutside`` with the
    supplied collapse point ``z0``.
    """
    builder = _CANONICAL.get(type(w))
    if builder is not None:
        return builder(w)
    if w.dim > 1 and w.is_binary:
        if z0 is None:
            raise ContractViolation("multivariate chaining needs a collapse point z0")
        return CollapseOutside(w, np.asarray(z0, dtype=float))
    raise ContractViolation(f"no canonical chaining for weight {type(w).__name__}")


def eval_chaining(v: ChainingFunction, z):
    """Evaluate a chaining function with type checking."""
    if not isinstance(v, ChainingFunction):
        raise ContractViolation("v must be a ChainingFunction")
    return v.transform(z)


# ---------------------------------------------------------------------------
# weighted cdf
# ---------------------------------------------------------------------------


def weighted_cdf(forecast: Parametric, w: WeightFunction, x: float) -> float:
    """Cdf of the forecast reweighted by ``w``.

    Returns E[1{X <= x} w(X)] / E[w(X)] for X distributed according to
    the forecast.  Indicator weights use closed forms; other weights
    fall back to adaptive quadrature against the forecast density.

    Raises
    ------
    WeightedMassZero
        If E[w(X)] is at or below the mass floor (1e-12).
    """
    if not isinstance(forecast, Parametric):
        raise ContractViolation("weighted_cdf needs a univariate parametric forecast")
    if w.dim != 1:
        raise DimensionMismatch("weighted_cdf needs a univariate weight")
    x = float(x)

    if isinstance(w, Constant):
        return float(forecast.cdf(x))
    if isinstance(w, IndicatorAbove):
        denom = 1.0 - float(forecast.cdf(w.t))
        if denom <= MASS_FLOOR:
            raise WeightedMassZero(
                f"forecast mass above {w.t} is {denom:.3e}, below the floor"
            )
        num = max(float(forecast.cdf(x)) - float(forecast.cdf(w.t)), 0.0)
        return min(num / denom, 1.0)
    if isinstance(w, IndicatorBelow):
        denom = float(forecast.cdf(w.t))
        if denom <= MASS_FLOOR:
            raise WeightedMassZero(
                f"forecast mass below {w.t} is {denom:.3e}, below the floor"
            )
        num = float(forecast.cdf(min(x, w.t)))
        return min(num / denom, 1.0)

    lo, hi = forecast.support_interval()
    pts = [p for p in w.breakpoints() if lo < p < hi]

    def integrand(z):
        return w(z) * forecast.pdf(z)

    denom, _ = integrate.quad(
        integrand, lo, hi, points=pts or None, limit=200, epsabs=1e-12, epsrel=1e-10
    )
    if denom <= MASS_FLOOR:
        raise WeightedMassZero(
            f"weighted forecast mass is {denom:.3e}, below the floor"
        )
    if x <= lo:
        return 0.0
    top = min(x, hi)
    num, _ = integrate.quad(
        integrand,
        lo,
        top,
        points=[p for p in pts if p < top] or None,
        limit=200,
        epsabs=1e-12,
        epsrel=1e-10,
    )
    return float(np.clip(num / denom, 0.0, 1.0))
