"""Calibration diagnostics: PIT, ranks, conditional PIT, reliability.

Conditional variants restrict attention to outcomes beyond a threshold,
which is where high-impact verification lives.  All randomised pieces
(rank tie-breaking, consistency bands, sampling) take an explicit seed
or generator so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .exceptions import (
    ContractViolation,
    DegenerateConditional,
    DimensionMismatch,
    InsufficientData,
    UnsupportedInput,
)
from .forecasts import Ensemble, Forecast, IndependentProduct, Parametric

__all__ = [
    "HistogramSummary",
    "ReliabilityFit",
    "pit",
    "rank",
    "cpit",
    "pit_ecdf",
    "histogram_summary",
    "rank_histogram",
    "reliability_index",
    "corp_reliability",
    "prerank_cpit",
]

# Conditioning events with forecast probability below this are refused.
_DEGENERATE_FLOOR = 1e-12

# Minimum ensemble members beyond the threshold for conditional work.
MIN_TAIL_MEMBERS = 10


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# PIT and ranks
# ---------------------------------------------------------------------------


def pit(forecast: Forecast, y: float) -> float:
    """Probability integral transform F(y) of a parametric forecast."""
    if isinstance(forecast, Ensemble):
        raise UnsupportedInput(
            "pit needs a smooth cdf; use rank for ensembles, or smooth them "
            "with postprocess.smooth_ensemble first"
        )
    if not isinstance(forecast, Parametric):
        raise ContractViolation("pit needs a univariate parametric forecast")
    return float(forecast.cdf(float(y)))


def rank(forecast, y: float, rng) -> int:
    """Rank of the observation within the pooled ensemble, 1-based.

    Ranks run from 1 (below every member) to m + 1 (above every member).
    Ties are broken uniformly at random among the admissible positions,
    driven by the supplied seed or generator.
    """
    members = forecast.members if isinstance(forecast, Ensemble) else np.asarray(
        forecast, dtype=float
    )
    if members.ndim != 1 or members.size == 0:
        raise ContractViolation("rank needs a non-empty 1-d ensemble")
    y = float(y)
    gen = _rng(rng)
    below = int(np.sum(members < y))
    ties = int(np.sum(members == y))
    return 1 + below + int(gen.integers(0, ties + 1))


def cpit(forecast: Forecast, y: float, t: float) -> float | None:
    """Conditional PIT beyond threshold t.

    Returns (F(y) - F(t)) / (1 - F(t)) when y > t, and None when the
    case does not qualify (y <= t).  Ensembles are smoothed to a normal
    first and need at least MIN_TAIL_MEMBERS members above t so the
    conditional tail is actually informed by the sample.

    Raises
    ------
    DegenerateConditional
        If the forecast puts essentially no mass above t.
    """
    y = float(y)
    t = float(t)
    if y <= t:
        return None
    if isinstance(forecast, Ensemble):
        n_above = int(np.sum(forecast.members > t))
        if n_above < MIN_TAIL_MEMBERS:
            raise UnsupportedInput(
                f"only {n_above} of {forecast.size} members exceed {t}; "
                f"conditional assessment needs at least {MIN_TAIL_MEMBERS}"
            )
        from .postprocess import smooth_ensemble

        forecast = smooth_ensemble(forecast)
    if not isinstance(forecast, Parametric):
        raise ContractViolation("cpit needs a parametric or ensemble forecast")
    ft = float(forecast.cdf(t))
    tail = 1.0 - ft
    if tail <= _DEGENERATE_FLOOR:
        raise DegenerateConditional(
            f"forecast probability above {t} is {tail:.3e}; conditional PIT undefined"
        )
    u = (float(forecast.cdf(y)) - ft) / tail
    return float(np.clip(u, 0.0, 1.0))


def pit_ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical cdf of PIT values: sorted values and levels i/n."""
    u = np.sort(np.asarray(values, dtype=float))
    if u.size == 0:
        raise InsufficientData("no PIT values")
    return u, np.arange(1, u.size + 1) / u.size


# ---------------------------------------------------------------------------
# histograms and the reliability index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramSummary:
    """Binned frequencies of PIT values or ranks."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=int)
        if edges.size != counts.size + 1:
            raise DimensionMismatch("need one more edge than bins")
        if int(counts.sum()) != self.n or self.n <= 0:
            raise ContractViolation("counts must sum to n > 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return self.counts.size

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n


def histogram_summary(values, bins: int = 20, lo: float = 0.0, hi: float = 1.0) -> HistogramSummary:
    """Histogram of values in [lo, hi] with equal bins (20 by default)."""
    u = np.asarray(values, dtype=float)
    if u.size == 0:
        raise InsufficientData("no values to bin")
    if np.any(u < lo) or np.any(u > hi):
        raise ContractViolation(f"values must lie inside [{lo}, {hi}]")
    counts, edges = np.histogram(u, bins=bins, range=(lo, hi))
    return HistogramSummary(edges, counts, int(u.size))


def rank_histogram(ranks, n_ranks: int) -> HistogramSummary:
    """Histogram over the integer ranks 1 .. n_ranks."""
    r = np.asarray(ranks, dtype=int)
    if r.size == 0:
        raise InsufficientData("no ranks to bin")
    if np.any(r < 1) or np.any(r > n_ranks):
        raise ContractViolation(f"ranks must lie in 1 .. {n_ranks}")
    counts = np.bincount(r, minlength=n_ranks + 1)[1:]
    edges = np.arange(n_ranks + 1) + 0.5
    return HistogramSummary(edges, counts, int(r.size))


def reliability_index(hist) -> float:
    """Sum of absolute deviations of bin frequencies from uniformity."""
    if isinstance(hist, HistogramSummary):
        f = hist.frequencies
    else:
        f = np.asarray(hist, dtype=float)
        if f.size == 0 or abs(f.sum() - 1.0) > 1e-9:
            raise ContractViolation("frequencies must sum to one")
    k = f.size
    return float(np.sum(np.abs(f - 1.0 / k)))


# ---------------------------------------------------------------------------
# CORP reliability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReliabilityFit:
    """Isotonic recalibration of event probabilities.

    ``probs`` are the sorted forecast probabilities, ``cep`` the fitted
    conditional event probabilities, and the band curves bound where the
    fit would fall for a calibrated forecaster at the given level.
    """

    probs: np.ndarray
    cep: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray
    level: float
    n: int


def _isotonic(y: np.ndarray) -> np.ndarray:
    return isotonic_regression(y).x


def corp_reliability(
    probs,
    outcomes,
    level: float = 0.99,
    resamples: int = 1000,
    seed=0,
    band_probes: int = 1024,
) -> ReliabilityFit:
    """CORP reliability diagram data with a consistency band.

    Sorts cases by forecast probability, pools adjacent violators to get
    non-decreasing conditional event probabilities, and resamples
    outcomes under the hypothesis of calibration to trace out a central
    band at ``level``.  For large inputs the band is evaluated on at
    most ``band_probes`` positions and interpolated between them.
    """
    p = np.asarray(probs, dtype=float)
    o = np.asarray(outcomes, dtype=float)
    if p.shape != o.shape or p.ndim != 1:
        raise DimensionMismatch("probs and outcomes must be 1-d arrays of equal length")
    if p.size == 0:
        raise InsufficientData("no cases")
    if np.any((p < 0.0) | (p > 1.0)):
        raise ContractViolation("probabilities must lie in [0, 1]")
    if not np.all((o == 0.0) | (o == 1.0)):
        raise ContractViolation("outcomes must be 0 or 1")
    if not 0.0 < level < 1.0:
        raise ContractViolation("level must lie in (0, 1)")

    order = np.argsort(p, kind="stable")
    ps = p[order]
    os_ = o[order]
    cep = _isotonic(os_)

    n = ps.size
    gen = _rng(seed)
    n_probe = min(n, band_probes)
    probe = np.unique(np.linspace(0, n - 1, n_probe).round().astype(int))
    sims = np.empty((resamples, probe.size))
    for r in range(resamples):
        sim = (gen.random(n) < ps).astype(float)
        sims[r] = _isotonic(sim)[probe]
    alpha = 1.0 - level
    lo_q = np.quantile(sims, alpha / 2.0, axis=0)
    hi_q = np.quantile(sims, 1.0 - alpha / 2.0, axis=0)
    idx = np.arange(n)
    band_lower = np.interp(idx, probe, lo_q)
    band_upper = np.interp(idx, probe, hi_q)
    return ReliabilityFit(ps, cep, band_lower, band_upper, level, n)


# ---------------------------------------------------------------------------
# pre-rank conditional PIT
# ---------------------------------------------------------------------------


def _apply_prerank(prerank, pts: np.ndarray) -> np.ndarray:
    """Evaluate a caller-supplied prerank on rows of (n, d)."""
    try:
        out = np.asarray(prerank(pts), dtype=float)
        if out.shape == (pts.shape[0],):
            return out
    except Exception:
        pass
    return np.asarray([float(prerank(row)) for row in pts], dtype=float)


def _is_increasing_on(margin: Parametric, prerank) -> bool:
    qs = margin.ppf(np.linspace(1e-6, 1.0 - 1e-6, 513))
    vals = _apply_prerank(prerank, qs[:, None])
    return bool(np.all(np.diff(vals) > 0.0))


def prerank_cpit(
    forecast,
    y,
    thresholds,
    prerank,
    n_samples: int = 200_000,
    seed=0,
) -> float | None:
    """Conditional PIT of a scalar summary of a multivariate outcome.

    The prerank function maps d-vectors to scalars; the conditional PIT
    of prerank(y) is taken against the distribution of prerank(X) under
    the forecast, conditioned beyond prerank(thresholds).  Parametric
    product forecasts are sampled (seeded); in one dimension a strictly
    increasing prerank reduces exactly to the univariate cpit.
    Ensembles are preranked member by member, then handled as in
    ``cpit`` (smoothing plus the minimum-tail-membership rule).
    """
    y = np.asarray(y, dtype=float)
    tvec = np.asarray(thresholds, dtype=float)

    if isinstance(forecast, IndependentProduct):
        d = forecast.dim
        if y.shape != (d,) or tvec.shape != (d,):
            raise DimensionMismatch("y and thresholds must be d-vectors")
        y_star = float(_apply_prerank(prerank, y[None, :])[0])
        t_star = float(_apply_prerank(prerank, tvec[None, :])[0])
        if y_star <= t_star:
            return None
        if d == 1 and _is_increasing_on(forecast.margins[0], prerank):
            return cpit(forecast.margins[0], float(y[0]), float(tvec[0]))
        gen = _rng(seed)
        s = _apply_prerank(prerank, forecast.sample(n_samples, gen))
        tail = float(np.mean(s > t_star))
        if tail * n_samples < MIN_TAIL_MEMBERS:
            raise DegenerateConditional(
                f"only {int(tail * n_samples)} of {n_samples} sampled preranks "
                f"exceed the threshold; conditional PIT is not estimable"
            )
        u = (float(np.mean(s <= y_star)) - (1.0 - tail)) / tail
        return float(np.clip(u, 0.0, 1.0))

    # ensemble route
    from .mvscores import MvEnsemble

    if isinstance(forecast, MvEnsemble):
        d = forecast.dim
        if y.shape != (d,) or tvec.shape != (d,):
            raise DimensionMismatch("y and thresholds must be d-vectors")
        vals = _apply_prerank(prerank, forecast.members.T)
        y_star = float(_apply_prerank(prerank, y[None, :])[0])
        t_star = float(_apply_prerank(prerank, tvec[None, :])[0])
        return cpit(Ensemble(vals), y_star, t_star)

    raise ContractViolation(
        "prerank_cpit needs an IndependentProduct forecast or an MvEnsemble"
    )
