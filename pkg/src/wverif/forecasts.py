"""Forecast representations.

A forecast is either an ensemble (a finite sample standing in for the
predictive distribution) or a parametric distribution.  Parametric
forecasts expose cdf/pdf/quantile/moment methods, all vectorised over
numpy arrays, plus seeded sampling.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ContractViolation, DimensionMismatch

__all__ = [
    "Forecast",
    "Ensemble",
    "Parametric",
    "Normal",
    "Logistic",
    "StudentT",
    "IndependentProduct",
    "ObservationCase",
]


class Forecast:
    """Base class for all forecast representations."""

    __slots__ = ()


@dataclass(frozen=True)
class Ensemble(Forecast):
    """Univariate ensemble forecast.

    Parameters
    ----------
    members : array_like
        One-dimensional array of member values, at least one member,
        all finite.
    """

    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ContractViolation("ensemble members must be a non-empty 1-d array")
        if not np.all(np.isfinite(m)):
            raise ContractViolation("ensemble members must be finite")
        object.__setattr__(self, "members", m)

    @property
    def size(self) -> int:
        return self.members.size

    def cdf(self, x):
        """Empirical cdf: fraction of members <= x."""
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(np.sort(self.members), x, side="right") / self.size
        return float(out) if out.ndim == 0 else out


class Parametric(Forecast):
    """Base class for univariate parametric forecasts.

    Subclasses provide a frozen scipy distribution through ``_dist``.
    """

    __slots__ = ()

    @property
    def _dist(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def cdf(self, x):
        return self._dist.cdf(x)

    def pdf(self, x):
        return self._dist.pdf(x)

    def ppf(self, q):
        return self._dist.ppf(q)

    def mean(self) -> float:
        return float(self._dist.mean())

    def variance(self) -> float:
        return float(self._dist.var())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._dist.rvs(size=n, random_state=rng)

    def support_interval(self, tail: float = 1e-12) -> tuple[float, float]:
        """An interval carrying all but ``2 * tail`` of the mass.

        Used to truncate quadrature domains.
        """
        return float(self._dist.ppf(tail)), float(self._dist.ppf(1.0 - tail))


@dataclass(frozen=True)
class Normal(Parametric):
    """Normal predictive distribution with mean and variance."""

    mean_: float
    variance_: float

    def __post_init__(self):
        if not np.isfinite(self.mean_) or not np.isfinite(self.variance_):
            raise ContractViolation("normal parameters must be finite")
        if self.variance_ <= 0.0:
            raise ContractViolation("normal variance must be positive")

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance_))

    @property
    def _dist(self):
        return stats.norm(self.mean_, self.sd)

    def mean(self) -> float:
        return float(self.mean_)

    def variance(self) -> float:
        return float(self.variance_)


@dataclass(frozen=True)
class Logistic(Parametric):
    """Logistic predictive distribution (location, scale)."""

    location: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0.0 or not np.isfinite(self.scale) or not np.isfinite(self.location):
            raise ContractViolation("logistic scale must be positive and finite")

    @property
    def _dist(self):
        return stats.logistic(self.location, self.scale)


@dataclass(frozen=True)
class StudentT(Parametric):
    """Student t predictive distribution (df, location, scale).

    ``from_moments`` builds the member of this family with a given mean
    and variance, which requires df > 2.
    """

    df: float
    location: float
    scale: float

    def __post_init__(self):
        if self.df <= 0.0 or self.scale <= 0.0:
            raise ContractViolation("student t needs df > 0 and scale > 0")

    @classmethod
    def from_moments(cls, df: float, mean: float, variance: float) -> "StudentT":
        if df <= 2.0:
            raise ContractViolation("moment matching requires df > 2")
        if variance <= 0.0:
            raise ContractViolation("variance must be positive")
        scale = float(np.sqrt(variance * (df - 2.0) / df))
        return cls(df=df, location=mean, scale=scale)

    @property
    def _dist(self):
        return stats.t(self.df, self.location, self.scale)


@dataclass(frozen=True)
class IndependentProduct(Forecast):
    """Multivariate parametric forecast with independent margins."""

    margins: tuple

    def __post_init__(self):
        margins = tuple(self.margins)
        if len(margins) == 0:
            raise ContractViolation("need at least one margin")
        for m in margins:
            if not isinstance(m, Parametric):
                raise ContractViolation("margins must be parametric forecasts")
        object.__setattr__(self, "margins", margins)

    @property
    def dim(self) -> int:
        return len(self.margins)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` vectors, returned with shape (n, dim)."""
        cols = [m.sample(n, rng) for m in self.margins]
        return np.column_stack(cols)

    def cdf(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(
                f"point has shape {x.shape}, forecast dimension is {self.dim}"
            )
        return float(np.prod([m.cdf(v) for m, v in zip(self.margins, x)]))


@dataclass(frozen=True)
class ObservationCase:
    """One verifying case: where, when, and what was observed."""

    station_id: str
    init_date: datetime.date
    lead_time: int
    value: float = field(default=np.nan)
