import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from wverif import (
    ContractViolation,
    DegenerateConditional,
    Ensemble,
    HistogramSummary,
    IndependentProduct,
    InsufficientData,
    Logistic,
    Normal,
    UnsupportedInput,
    corp_reliability,
    cpit,
    histogram_summary,
    pit,
    pit_ecdf,
    prerank_cpit,
    rank,
    rank_histogram,
    reliability_index,
)


def test_pit_values():
    assert pit(Logistic(0.0, 1.0), np.log(3.0)) == pytest.approx(0.75)
    assert pit(Normal(0.0, 1.0), 0.0) == pytest.approx(0.5)
    with pytest.raises(UnsupportedInput):
        pit(Ensemble(np.array([0.0, 1.0])), 0.5)


def test_pit_uniform_under_truth():
    rng = np.random.default_rng(1)
    f = Normal(0.3, 2.0)
    u = np.array([pit(f, y) for y in f.sample(4000, rng)])
    d = stats.kstest(u, "uniform").statistic
    assert d < 1.63 / np.sqrt(u.size)


def test_rank_deterministic_without_ties():
    r = rank(Ensemble(np.array([1.0, 2.0, 3.0])), 2.5, np.random.default_rng(0))
    assert r == 3
    assert rank(Ensemble(np.array([1.0, 2.0, 3.0])), 0.0, np.random.default_rng(0)) == 1
    assert rank(Ensemble(np.array([1.0, 2.0, 3.0])), 4.0, np.random.default_rng(0)) == 4


def test_rank_ties_spread_uniformly():
    e = Ensemble(np.array([1.0, 2.0, 2.0, 3.0]))
    rng = np.random.default_rng(5)
    counts = np.zeros(6)
    n = 30000
    for _ in range(n):
        counts[rank(e, 2.0, rng) - 1] += 1
    # admissible ranks are 2, 3, 4
    assert counts[0] == counts[4] == counts[5] == 0
    assert_allclose(counts[1:4] / n, np.ones(3) / 3.0, atol=0.02)


def test_cpit_basic():
    f = Normal(0.0, 1.0)
    y = float(f.ppf(0.8))
    assert cpit(f, y, 0.0) == pytest.approx((0.8 - 0.5) / 0.5)
    assert cpit(f, -0.5, 0.0) is None
    assert cpit(f, 0.0, 0.0) is None


def test_cpit_degenerate_tail():
    with pytest.raises(DegenerateConditional):
        cpit(Normal(0.0, 1.0), 50.0, 45.0)


def test_cpit_ensemble_needs_tail_members():
    rng = np.random.default_rng(2)
    big = Ensemble(np.concatenate([rng.normal(size=30), rng.normal(3.0, 0.5, 30)]))
    u = cpit(big, 3.2, 2.0)
    assert u is not None and 0.0 <= u <= 1.0
    sparse = Ensemble(np.linspace(-1.0, 0.5, 21))
    with pytest.raises(UnsupportedInput):
        cpit(sparse, 0.45, 0.4)


def test_cpit_uniform_for_ideal_forecaster():
    rng = np.random.default_rng(3)
    n = 20000
    mu = rng.normal(0.0, np.sqrt(2.0 / 3.0), n)
    y = rng.normal(mu, np.sqrt(1.0 / 3.0))
    t = 1.0
    vals = [cpit(Normal(m, 1.0 / 3.0), yy, t) for m, yy in zip(mu, y) if yy > t]
    u = np.array(vals, dtype=float)
    assert u.size > 500
    d = stats.kstest(u, "uniform").statistic
    assert d < 1.63 / np.sqrt(u.size)


def test_pit_ecdf():
    u, p = pit_ecdf([0.3, 0.1, 0.9])
    assert_allclose(u, [0.1, 0.3, 0.9])
    assert_allclose(p, [1.0 / 3.0, 2.0 / 3.0, 1.0])
    with pytest.raises(InsufficientData):
        pit_ecdf([])


def test_histogram_summary():
    h = histogram_summary(np.array([0.05, 0.05, 0.55]), bins=10)
    assert h.k == 10
    assert h.n == 3
    assert h.counts[0] == 2
    assert h.counts[5] == 1
    assert_allclose(h.frequencies.sum(), 1.0)
    assert h.bin_edges[0] == 0.0 and h.bin_edges[-1] == 1.0


def test_histogram_summary_rejects_out_of_range():
    with pytest.raises(ContractViolation):
        histogram_summary(np.array([-0.1, 0.5]))


def test_rank_histogram_counts():
    h = rank_histogram(np.array([1, 1, 2, 4]), n_ranks=4)
    assert_allclose(h.counts, [2, 1, 0, 1])
    with pytest.raises(ContractViolation):
        rank_histogram(np.array([0]), n_ranks=4)
    with pytest.raises(ContractViolation):
        rank_histogram(np.array([5]), n_ranks=4)


def test_reliability_index_extremes():
    k = 20
    point_mass = np.zeros(k)
    point_mass[0] = 1.0
    assert reliability_index(point_mass) == pytest.approx(2.0 * (k - 1) / k)
    assert reliability_index(np.ones(k) / k) == 0.0
    h = histogram_summary(np.full(100, 0.025), bins=20)
    assert reliability_index(h) == pytest.approx(2.0 * 19 / 20)


def test_corp_pools_adjacent_violators():
    fit = corp_reliability(
        np.array([0.2, 0.8]), np.array([1.0, 0.0]), resamples=50, seed=0
    )
    assert_allclose(fit.cep, [0.5, 0.5])
    assert_allclose(fit.probs, [0.2, 0.8])


def test_corp_output_is_monotone_and_banded():
    rng = np.random.default_rng(11)
    p = rng.uniform(size=800)
    o = (rng.uniform(size=800) < p).astype(float)
    fit = corp_reliability(p, o, resamples=200, seed=4)
    assert np.all(np.diff(fit.cep) >= -1e-12)
    assert np.all(fit.band_lower <= fit.band_upper + 1e-12)
    assert fit.n == 800
    # a calibrated forecaster should rarely escape its own band
    inside = (fit.cep >= fit.band_lower - 1e-9) & (fit.cep <= fit.band_upper + 1e-9)
    assert inside.mean() > 0.9


def test_corp_band_tracks_the_diagonal():
    rng = np.random.default_rng(12)
    p = rng.uniform(size=2000)
    o = (rng.uniform(size=2000) < p).astype(float)
    fit = corp_reliability(p, o, resamples=300, seed=9)
    frac = np.mean((fit.probs >= fit.band_lower) & (fit.probs <= fit.band_upper))
    assert frac > 0.95


def test_corp_resampling_is_seeded():
    p = np.linspace(0.05, 0.95, 200)
    o = (np.arange(200) % 3 == 0).astype(float)
    a = corp_reliability(p, o, resamples=100, seed=7)
    b = corp_reliability(p, o, resamples=100, seed=7)
    assert_allclose(a.band_lower, b.band_lower)
    assert_allclose(a.band_upper, b.band_upper)
    c = corp_reliability(p, o, resamples=100, seed=8)
    assert not np.allclose(a.band_upper, c.band_upper)


def test_corp_input_validation():
    with pytest.raises(ContractViolation):
        corp_reliability(np.array([1.2]), np.array([1.0]))
    with pytest.raises(ContractViolation):
        corp_reliability(np.array([0.5]), np.array([0.4]))
    with pytest.raises(InsufficientData):
        corp_reliability(np.array([]), np.array([]))


def test_prerank_cpit_univariate_reduction():
    """In one dimension with an increasing prerank the conditional PIT of
    the summary equals the plain conditional PIT."""
    f = IndependentProduct((Normal(0.0, 1.0),))
    y = np.array([1.3])
    t = np.array([0.5])
    got = prerank_cpit(f, y, t, lambda v: v[..., 0])
    want = cpit(Normal(0.0, 1.0), 1.3, 0.5)
    assert got == pytest.approx(want, abs=1e-12)
    assert prerank_cpit(f, np.array([0.2]), t, lambda v: v[..., 0]) is None


def test_prerank_cpit_mean_summary_matches_direct_mc():
    """The sampled route should agree with an oracle that conditions the
    summary distribution directly; the mean of three independent normals
    is normal, so the oracle is exact."""
    margins = (Normal(0.0, 1.0), Normal(0.5, 2.0), Normal(-0.2, 0.5))
    f = IndependentProduct(margins)
    y = np.array([1.0, 2.0, 0.4])
    t = np.array([0.1, 0.1, 0.1])

    def mean_prerank(v):
        return np.mean(v, axis=-1)

    got = prerank_cpit(f, y, t, mean_prerank, n_samples=400_000, seed=5)

    mean = sum(m.mean() for m in margins) / 3.0
    var = sum(m.variance() for m in margins) / 9.0
    summary = Normal(mean, var)
    want = cpit(summary, float(np.mean(y)), float(np.mean(t)))
    assert got == pytest.approx(want, abs=5e-3)


def test_prerank_cpit_ensemble_route():
    rng = np.random.default_rng(6)
    members = rng.normal(size=(3, 200))
    from wverif import MvEnsemble

    e = MvEnsemble(members)
    y = np.array([0.9, 0.9, 0.9])
    t = np.zeros(3)
    got = prerank_cpit(e, y, t, lambda v: np.mean(v, axis=-1))
    assert got is None or 0.0 <= got <= 1.0
