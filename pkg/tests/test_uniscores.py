import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from wverif import (
    CensorAbove,
    CensorBelow,
    Constant,
    ContractViolation,
    Ensemble,
    GaussCdf,
    GaussCdfChain,
    Identity,
    IndicatorAbove,
    IndicatorBelow,
    Logistic,
    Normal,
    NumericalError,
    OneMinusGaussCdf,
    ScoreValue,
    StudentT,
    WeightedMassZero,
    brier,
    crps,
    crps_ensemble,
    crps_normal,
    crps_numeric,
    owcrps,
    owcrps_bs,
    twcrps,
    twcrps_decomposition_check,
    vrcrps,
)


def test_score_value_clamps_roundoff():
    assert ScoreValue(-1e-12, "x").value == 0.0
    assert float(ScoreValue(0.5, "x")) == 0.5
    with pytest.raises(NumericalError):
        ScoreValue(-1e-6, "x")
    with pytest.raises(NumericalError):
        ScoreValue(np.nan, "x")


def test_brier_hand_values():
    f = Normal(0.0, 1.0)
    assert brier(f, 1.0, 0.0).value == pytest.approx(0.25)
    assert brier(f, -1.0, 0.0).value == pytest.approx(0.25)
    e = Ensemble(np.array([0.0, 2.0]))
    assert brier(e, 2.0, 1.0).value == pytest.approx(0.25)
    assert brier(e, 0.5, 1.0).value == pytest.approx(0.25)


def test_crps_ensemble_hand_value():
    e = Ensemble(np.array([0.0, 2.0]))
    assert crps_ensemble(e, 1.0).value == pytest.approx(0.5)
    assert crps_ensemble(e, 1.0, fair=True).value == pytest.approx(0.0)
    single = Ensemble(np.array([1.5]))
    assert crps_ensemble(single, 1.0).value == pytest.approx(0.5)
    with pytest.raises(ContractViolation):
        crps_ensemble(single, 1.0, fair=True)


def test_crps_ensemble_matches_integral_form():
    """Kernel form against the cdf-integral form done by quadrature."""
    rng = np.random.default_rng(31)
    for _ in range(20):
        x = rng.normal(size=rng.integers(2, 9))
        y = float(rng.normal())
        e = Ensemble(x)
        lo = min(x.min(), y) - 1.0
        hi = max(x.max(), y) + 1.0
        pts = np.sort(np.concatenate([x, [y]]))

        def integrand(z):
            return (e.cdf(z) - (1.0 if y <= z else 0.0)) ** 2

        total = 0.0
        knots = np.concatenate([[lo], pts, [hi]])
        for a, b in zip(knots[:-1], knots[1:]):
            part, _ = integrate.quad(integrand, a, b, limit=100)
            total += part
        assert crps_ensemble(e, y).value == pytest.approx(total, abs=1e-8)


def test_crps_normal_center_value():
    # E|X - mu| for X ~ N(mu, s^2) is s sqrt(2/pi); the spread term is
    # s / sqrt(pi).  At y = mu the score is s (2 phi(0) - 1/sqrt(pi)).
    want = 2.0 * stats.norm.pdf(0.0) - 1.0 / np.sqrt(np.pi)
    assert crps_normal(0.0, 1.0, 0.0).value == pytest.approx(want, abs=1e-15)
    assert crps_normal(0.0, 1.0, 0.0).value == pytest.approx(
        0.23369497725510913, abs=1e-15
    )
    assert crps_normal(3.0, 2.0, 3.0).value == pytest.approx(2.0 * want, abs=1e-14)


def test_crps_normal_matches_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(100):
        mu = float(rng.uniform(-5.0, 5.0))
        sigma = float(rng.uniform(0.2, 3.0))
        y = float(rng.normal(mu, 2.0 * sigma))
        closed = crps_normal(mu, sigma, y).value
        numeric = crps_numeric(Normal(mu, sigma**2), y).value
        assert abs(closed - numeric) < 1e-6


def test_crps_logistic_center_value():
    # At the location parameter the logistic CRPS is s (2 ln 2 - 1).
    got = crps(Logistic(0.0, 1.0), 0.0).value
    assert got == pytest.approx(2.0 * np.log(2.0) - 1.0, abs=1e-9)
    got2 = crps(Logistic(1.0, 0.5), 1.0).value
    assert got2 == pytest.approx(0.5 * (2.0 * np.log(2.0) - 1.0), abs=1e-9)


def test_crps_dispatcher():
    e = Ensemble(np.array([0.0, 2.0]))
    assert crps(e, 1.0).value == pytest.approx(0.5)
    assert crps(Normal(0.0, 1.0), 0.3).value == pytest.approx(
        crps_normal(0.0, 1.0, 0.3).value, abs=1e-14
    )
    f = StudentT.from_moments(5.0, 0.0, 1.0)
    assert crps(f, 0.5).value == pytest.approx(crps_numeric(f, 0.5).value, abs=1e-12)


def test_twcrps_hand_value():
    e = Ensemble(np.array([0.0, 2.0]))
    assert twcrps(e, 1.0, CensorAbove(1.0)).value == pytest.approx(0.25)


def test_twcrps_identity_chaining_is_plain_crps():
    rng = np.random.default_rng(12)
    for _ in range(50):
        x = rng.normal(size=rng.integers(2, 10))
        y = float(rng.normal())
        a = twcrps(Ensemble(x), y, Identity()).value
        b = crps_ensemble(Ensemble(x), y).value
        assert abs(a - b) < 1e-12
    f = Normal(0.4, 1.3)
    assert twcrps(f, 0.9, Identity()).value == pytest.approx(
        crps(f, 0.9).value, abs=1e-7
    )


def test_twcrps_ensemble_is_crps_of_censored_members():
    rng = np.random.default_rng(13)
    for _ in range(50):
        x = rng.normal(size=7)
        y = float(rng.normal())
        t = float(rng.uniform(-1.0, 1.0))
        a = twcrps(Ensemble(x), y, CensorAbove(t)).value
        b = crps_ensemble(Ensemble(np.maximum(x, t)), max(y, t)).value
        assert abs(a - b) < 1e-12


def _dense_kernel_crps(x: np.ndarray, y: float) -> float:
    # Kernel score with the spread term in the O(m log m) sorted form:
    # sum_ij |x_i - x_j| = 2 sum_i (2i - m + 1) x_(i).
    x = np.sort(x)
    m = x.size
    idx = np.arange(m)
    spread = np.sum(x * (2 * idx - m + 1)) / m**2
    return float(np.abs(x - y).mean() - spread)


def test_twcrps_parametric_against_quantile_ensemble():
    """Chained kernel score of a dense quantile ensemble converges to the
    parametric route."""
    f = Normal(0.3, 1.1**2)
    m = 20000
    levels = (np.arange(m) + 0.5) / m
    q = f.ppf(levels)
    for chain, y in (
        (CensorAbove(0.8), 1.4),
        (CensorAbove(0.8), 0.2),
        (CensorBelow(0.1), -0.7),
        (GaussCdfChain(0.5, 0.9), 0.6),
    ):
        dense = _dense_kernel_crps(chain(q), float(chain(y)))
        exact = twcrps(f, y, chain).value
        assert abs(dense - exact) < 5e-4, (chain, y, dense, exact)


def test_twcrps_constant_below_threshold():
    f = Normal(0.0, 1.0)
    vals = [twcrps(f, y, CensorAbove(1.0)).value for y in (-3.0, -1.5, 0.0, 0.999)]
    assert np.ptp(vals) < 1e-8


def test_owcrps_zero_when_outcome_unweighted():
    f = Normal(0.0, 1.0)
    assert owcrps(f, -1.0, IndicatorAbove(0.0)).value == 0.0


def test_owcrps_refuses_raw_ensembles():
    from wverif import UnsupportedInput

    e = Ensemble(np.array([-0.5, 0.5, 1.5]))
    with pytest.raises(UnsupportedInput):
        owcrps(e, 2.0, IndicatorAbove(0.0))


def test_owcrps_constant_weight_is_crps():
    f = Normal(0.2, 0.8)
    assert owcrps(f, 0.5, Constant()).value == pytest.approx(
        crps(f, 0.5).value, abs=1e-7
    )


def test_owcrps_matches_truncated_crps():
    """With an indicator weight the outcome-weighted score is the CRPS of
    the truncated forecast; scipy's truncnorm provides the oracle cdf."""
    mu, sd, t = 0.3, 1.2, 0.0
    f = Normal(mu, sd**2)
    a = (t - mu) / sd
    tn = stats.truncnorm(a, np.inf, loc=mu, scale=sd)
    for y in (0.5, 1.0, 2.5):

        def integrand(z):
            return (tn.cdf(z) - (1.0 if y <= z else 0.0)) ** 2

        left, _ = integrate.quad(integrand, t, y, limit=200)
        right, _ = integrate.quad(integrand, y, mu + 10 * sd, limit=200)
        want = left + right
        got = owcrps(f, y, IndicatorAbove(t)).value
        assert got == pytest.approx(want, abs=1e-6)


def test_owcrps_smooth_weight_against_rejection_sampling():
    """Monte Carlo oracle: draw from the reweighted density by rejection
    (the weight is bounded by one), then score the accepted sample with
    the kernel form."""
    f = Normal(0.3, 1.44)
    w = GaussCdf(0.5, 0.9)
    rng = np.random.default_rng(2024)
    x = f.sample(2_000_000, rng)
    keep = x[rng.random(x.size) < w(x)]
    assert keep.size > 500_000
    for y in (0.8, 1.6):
        dense = _dense_kernel_crps(keep, y)
        got = owcrps(f, y, w).value
        assert got == pytest.approx(float(w(y)) * dense, abs=4e-3)


def test_owcrps_mass_floor():
    with pytest.raises(WeightedMassZero):
        owcrps(Normal(0.0, 1.0), 101.0, IndicatorAbove(100.0))


def test_owcrps_bs_below_threshold_is_brier():
    f = Normal(0.0, 1.0)
    for y in (-2.0, -0.3, 0.0):
        got = owcrps_bs(f, y, 0.0).value
        assert got == pytest.approx(brier(f, y, 0.0).value, abs=1e-12)


def test_owcrps_bs_hand_value():
    assert owcrps_bs(Normal(0.0, 1.0), -1.0, 0.0).value == pytest.approx(0.25)


def test_owcrps_bs_is_brier_plus_conditional_tail():
    f = Normal(0.2, 1.5)
    t = 0.4
    for y in (-1.0, 0.1, 0.9, 2.3):
        want = brier(f, y, t).value
        if y > t:
            want += owcrps(f, y, IndicatorAbove(t)).value
        assert owcrps_bs(f, y, t).value == pytest.approx(want, abs=1e-12)


def test_owcrps_bs_far_above_threshold_reduces_to_owcrps():
    # With essentially no forecast mass at or below t the Brier term
    # vanishes and the conditional part is the whole score.
    f = Normal(10.0, 1.0)
    got = owcrps_bs(f, 11.0, 0.0).value
    assert got == pytest.approx(owcrps(f, 11.0, IndicatorAbove(0.0)).value, abs=1e-12)


def test_vrcrps_hand_value():
    e = Ensemble(np.array([0.0, 2.0]))
    assert vrcrps(e, 1.0, IndicatorAbove(1.0), x0=0.0).value == pytest.approx(0.5)


def test_vrcrps_constant_weight_is_crps():
    e = Ensemble(np.array([-0.3, 0.9, 2.2]))
    assert vrcrps(e, 0.4, Constant(), x0=0.0).value == pytest.approx(
        crps_ensemble(e, 0.4).value, abs=1e-12
    )
    f = Normal(0.1, 1.2)
    assert vrcrps(f, 0.4, Constant(), x0=0.0).value == pytest.approx(
        crps(f, 0.4).value, abs=1e-6
    )


def test_vrcrps_indicator_anchor_equals_twcrps():
    """With w = 1{z > t} and the anchor at t the re-scaled score equals
    the censored threshold-weighted score."""
    rng = np.random.default_rng(99)
    for _ in range(1000):
        x = rng.normal(size=rng.integers(2, 12))
        y = float(rng.normal())
        t = float(rng.uniform(-1.5, 1.5))
        a = vrcrps(Ensemble(x), y, IndicatorAbove(t), x0=t).value
        b = twcrps(Ensemble(x), y, CensorAbove(t)).value
        assert abs(a - b) < 1e-12


def test_vrcrps_parametric_against_double_quadrature():
    mu, var, t, x0 = 0.3, 1.44, 0.31, 0.0
    sd = np.sqrt(var)
    f = stats.norm(mu, sd).pdf
    hi = mu + 9 * sd
    ew = integrate.quad(f, t, hi)[0]
    c3 = integrate.quad(lambda x: abs(x - x0) * f(x), t, hi)[0]
    pair = integrate.dblquad(
        lambda xp, x: abs(x - xp) * f(x) * f(xp), t, hi, t, hi, epsabs=1e-11
    )[0]
    for y in (0.8, 2.0, -0.5):
        wy = 1.0 if y > t else 0.0
        mdy = integrate.quad(lambda x: abs(x - y) * f(x), t, hi)[0]
        want = mdy * wy - 0.5 * pair + (c3 - abs(y - x0) * wy) * (ew - wy)
        got = vrcrps(Normal(mu, var), y, IndicatorAbove(t), x0).value
        assert got == pytest.approx(want, abs=1e-6)


def _dense_vr(x: np.ndarray, y: float, w, x0: float) -> float:
    # Weighted pair term via cumulative sums over the sorted sample:
    # sum_ij |x_i - x_j| w_i w_j = 2 sum_i w_i (x_i W_i - M_i) with
    # W_i, M_i the weighted count and first moment below rank i.
    x = np.sort(x)
    wx = np.asarray(w(x), dtype=float)
    wy = float(w(y))
    m = x.size
    below_w = np.concatenate([[0.0], np.cumsum(wx)])[:-1]
    below_m = np.concatenate([[0.0], np.cumsum(wx * x)])[:-1]
    epair = 2.0 * np.sum(wx * (x * below_w - below_m)) / m**2
    term1 = float(np.mean(np.abs(x - y) * wx)) * wy
    mean_dist = float(np.mean(np.abs(x - x0) * wx))
    return term1 - 0.5 * epair + (mean_dist - abs(y - x0) * wy) * (
        float(wx.mean()) - wy
    )


def test_vrcrps_parametric_smooth_weight_against_quantile_ensemble():
    f = Normal(0.0, 1.0)
    w = GaussCdf(0.3, 0.8)
    m = 20000
    q = f.ppf((np.arange(m) + 0.5) / m)
    for y in (-0.4, 0.9):
        dense = _dense_vr(q, y, w, 0.0)
        exact = vrcrps(f, y, w, x0=0.0).value
        assert abs(dense - exact) < 5e-4


def test_dense_vr_helper_matches_kernel_form():
    rng = np.random.default_rng(3)
    w = GaussCdf(0.0, 1.0)
    for _ in range(20):
        x = rng.normal(size=9)
        y = float(rng.normal())
        assert _dense_vr(x, y, w, 0.2) == pytest.approx(
            vrcrps(Ensemble(x), y, w, x0=0.2).value, abs=1e-12
        )


def test_twcrps_decomposition_residual():
    rng = np.random.default_rng(17)
    for _ in range(50):
        mu = float(rng.uniform(-2.0, 2.0))
        sigma = float(rng.uniform(0.3, 2.0))
        t = float(rng.uniform(mu - sigma, mu + 1.5 * sigma))
        y = float(rng.normal(mu, 1.5 * sigma))
        res = twcrps_decomposition_check(Normal(mu, sigma**2), y, t)
        assert abs(res) < 1e-8


def test_score_inputs_validated():
    with pytest.raises(ContractViolation):
        crps(Normal(0.0, 1.0), np.inf)
    with pytest.raises(ContractViolation):
        twcrps(Normal(0.0, 1.0), 0.5, IndicatorAbove(0.0))
    with pytest.raises(ContractViolation):
        owcrps(Normal(0.0, 1.0), 0.5, CensorAbove(0.0))
    with pytest.raises(ContractViolation):
        vrcrps(Normal(0.0, 1.0), 0.5, Constant(), x0=np.nan)


def test_score_value_metadata():
    v = twcrps(Ensemble(np.array([0.0, 2.0])), 1.0, CensorAbove(1.0))
    assert v.score_name == "twcrps"
    assert "chaining" in v.params or "weight" in v.params
