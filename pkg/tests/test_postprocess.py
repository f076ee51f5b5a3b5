import datetime
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from wverif import (
    ContractViolation,
    Ensemble,
    EmosParams,
    InsufficientData,
    MvEnsemble,
    Normal,
    StationMeta,
    TrainingWindow,
    crps,
    crps_ensemble,
    ecc_reorder,
    fit_climatology,
    fit_emos,
    lapse_rate_correct,
    predict_emos,
    smooth_ensemble,
)


def test_lapse_rate_correction():
    # model cell 1000 m above the station: forecasts warmed by 6 degrees
    assert lapse_rate_correct(10.0, 1500.0, 500.0) == pytest.approx(16.0)
    assert lapse_rate_correct(10.0, 500.0, 1500.0) == pytest.approx(4.0)
    out = lapse_rate_correct(np.array([10.0, 12.0]), 800.0, 300.0)
    assert_allclose(out, [13.0, 15.0])


def test_smooth_ensemble_moments():
    f = smooth_ensemble(Ensemble(np.array([0.0, 0.0, 2.0, 2.0])))
    assert f.mean() == pytest.approx(1.0)
    assert f.variance() == pytest.approx(4.0 / 3.0)
    with pytest.raises(ContractViolation):
        smooth_ensemble(Ensemble(np.array([1.0])))


def test_smooth_ensemble_floors_variance():
    f = smooth_ensemble(Ensemble(np.array([2.0, 2.0, 2.0])))
    assert f.variance() > 0.0


def test_fit_climatology():
    obs = np.tile([1.0, -1.0], 15)
    f = fit_climatology(obs)
    assert f.mean() == pytest.approx(0.0)
    assert f.variance() == pytest.approx(30.0 / 29.0)
    with pytest.raises(InsufficientData):
        fit_climatology(np.arange(9, dtype=float))


def test_training_window_eviction():
    w = TrainingWindow(capacity_days=45)
    meta = StationMeta("S1")
    start = datetime.date(2021, 1, 1)
    for k in range(50):
        w.add_case(start + datetime.timedelta(days=k), 1.0, 0.5, meta, 1.2)
    assert w.distinct_days == 45
    assert min(w.dates) == start + datetime.timedelta(days=5)


def test_training_window_keeps_all_stations_of_a_day():
    w = TrainingWindow(capacity_days=2)
    d = datetime.date(2021, 1, 1)
    for sid in ("A", "B", "C"):
        w.add_case(d, 1.0, 0.5, StationMeta(sid), 1.0)
    w.add_case(d + datetime.timedelta(days=1), 1.0, 0.5, StationMeta("A"), 1.0)
    assert w.size == 4
    w.add_case(d + datetime.timedelta(days=2), 1.0, 0.5, StationMeta("A"), 1.0)
    assert w.size == 2
    assert w.distinct_days == 2


def test_training_window_requires_date_order():
    w = TrainingWindow()
    w.add_case(datetime.date(2021, 1, 2), 1.0, 0.5, StationMeta("A"), 1.0)
    with pytest.raises(ContractViolation):
        w.add_case(datetime.date(2021, 1, 1), 1.0, 0.5, StationMeta("A"), 1.0)


def test_emos_params_validation_and_round_trip():
    p = EmosParams(
        beta=(0.1, 0.9, 0.0, 0.0), sigma0=0.5, sigma1=0.8, n_iter=12, objective=0.42
    )
    q = EmosParams.from_dict(json.loads(json.dumps(p.to_dict())))
    assert q == p
    with pytest.raises(ContractViolation):
        EmosParams(beta=(0.0, 1.0), sigma0=0.5, sigma1=0.5)
    with pytest.raises(ContractViolation):
        EmosParams(beta=(0.0, 1.0, 0.0, 0.0), sigma0=0.0, sigma1=0.5)


def _synthetic_training(rng, n, beta, sigma0, sigma1):
    """Training draws with two dispersion regimes.

    Calm cases carry almost no ensemble variance and pin sigma0; the
    volatile half pins sigma1.  A single mid-range regime would leave
    the two coefficients nearly collinear at this sample size.
    """
    xbar = rng.uniform(-10.0, 10.0, n)
    calm = rng.random(n) < 0.5
    var = np.where(
        calm,
        np.exp(rng.uniform(np.log(0.01), np.log(0.05), n)),
        np.exp(rng.uniform(np.log(3.0), np.log(10.0), n)),
    )
    mhd = rng.normal(0.0, 1.0, n)
    tpi = rng.normal(0.0, 1.0, n)
    mu = beta[0] + beta[1] * xbar + beta[2] * mhd + beta[3] * tpi
    y = rng.normal(mu, np.sqrt(sigma0 + sigma1 * var))
    return xbar, var, mhd, tpi, y


def test_fit_emos_recovers_parameters():
    rng = np.random.default_rng(314)
    beta = (1.0, 0.9, 0.5, -0.3)
    sigma0, sigma1 = 0.8, 0.4
    data = _synthetic_training(rng, 2000, beta, sigma0, sigma1)
    params = fit_emos(data)
    assert params.converged
    for got, want in zip(params.beta, beta):
        assert abs(got - want) < 0.1
    assert abs(params.sigma0 - sigma0) / sigma0 < 0.2
    assert abs(params.sigma1 - sigma1) / sigma1 < 0.2


def test_fit_emos_objective_history_descends():
    rng = np.random.default_rng(7)
    data = _synthetic_training(rng, 300, (0.5, 1.1, 0.0, 0.0), 0.6, 0.5)
    history = []
    fit_emos(data, history=history)
    assert len(history) >= 2
    assert np.all(np.diff(history) <= 1e-9)


def test_fit_emos_warm_start():
    rng = np.random.default_rng(8)
    data = _synthetic_training(rng, 400, (0.5, 1.1, 0.2, -0.1), 0.6, 0.5)
    cold = fit_emos(data)
    warm = fit_emos(data, init=cold)
    assert warm.n_iter <= cold.n_iter
    assert warm.objective <= cold.objective + 1e-10


def test_fit_emos_needs_enough_cases():
    with pytest.raises(InsufficientData):
        fit_emos((np.ones(5), np.ones(5), np.zeros(5), np.zeros(5), np.ones(5)))


def test_predict_emos_formulas():
    p = EmosParams(beta=(1.0, 2.0, 0.5, -1.0), sigma0=0.3, sigma1=2.0)
    meta = StationMeta("X", mhd=4.0, tpi=1.0)
    f = predict_emos(p, 3.0, 0.25, meta)
    assert f.mean() == pytest.approx(1.0 + 6.0 + 2.0 - 1.0)
    assert f.variance() == pytest.approx(0.3 + 0.5)
    with pytest.raises(ContractViolation):
        predict_emos(p, 3.0, -0.1, meta)


def test_emos_beats_biased_underdispersed_ensemble():
    """Truth: y ~ N(xbar + 1, 2^2); the raw ensemble spreads only 0.5
    around xbar, so it is biased and badly underdispersed."""
    rng = np.random.default_rng(2718)
    n_train, n_test, m = 2000, 500, 21
    xbar = rng.uniform(5.0, 25.0, n_train + n_test)
    y = rng.normal(xbar + 1.0, 2.0)
    members = rng.normal(xbar[:, None], 0.5, (n_train + n_test, m))
    mtrain = slice(0, n_train)
    params = fit_emos(
        (
            members[mtrain].mean(axis=1),
            members[mtrain].var(axis=1, ddof=1),
            np.zeros(n_train),
            np.zeros(n_train),
            y[mtrain],
        )
    )
    raw_scores = []
    emos_scores = []
    meta = StationMeta("S")
    for k in range(n_train, n_train + n_test):
        raw_scores.append(crps_ensemble(Ensemble(members[k]), y[k]).value)
        f = predict_emos(
            params, members[k].mean(), members[k].var(ddof=1), meta
        )
        emos_scores.append(crps(f, y[k]).value)
    assert np.mean(emos_scores) < np.mean(raw_scores)
    # with this bias and dispersion error the gap is not marginal
    assert np.mean(emos_scores) < 0.75 * np.mean(raw_scores)


def test_ecc_reorder_exact_quantiles_and_ranks():
    margins = [Normal(0.0, 1.0), Normal(5.0, 4.0), Normal(-2.0, 0.25)]
    raw = MvEnsemble(
        np.array(
            [
                [3.0, 1.0, 2.0],
                [0.1, 0.3, 0.2],
                [-1.0, 5.0, 2.0],
            ]
        )
    )
    out = ecc_reorder(margins, raw)
    levels = np.array([1.0, 3.0, 5.0]) / 6.0
    for i, mg in enumerate(margins):
        want_sorted = np.asarray(mg.ppf(levels))
        assert_allclose(np.sort(out.members[i]), want_sorted, rtol=0, atol=0)
        assert_allclose(
            np.argsort(np.argsort(out.members[i])),
            np.argsort(np.argsort(raw.members[i])),
        )


def test_ecc_reorder_ties_broken_by_member_index():
    margins = [Normal(0.0, 1.0)]
    raw = MvEnsemble(np.array([[1.0, 1.0, 0.0]]))
    out = ecc_reorder(margins, raw)
    q = Normal(0.0, 1.0).ppf(np.array([1.0, 3.0, 5.0]) / 6.0)
    assert_allclose(out.members[0], [q[1], q[2], q[0]])


def test_ecc_reorder_validation():
    from wverif import DimensionMismatch

    with pytest.raises(DimensionMismatch):
        ecc_reorder([Normal(0.0, 1.0)], MvEnsemble(np.zeros((2, 3))))
    with pytest.raises(ContractViolation):
        ecc_reorder([object()], MvEnsemble(np.zeros((1, 3))))


def test_ecc_output_scores_against_truth():
    """Sanity run of the full chain: smooth margins, reorder, and check
    the coupled ensemble beats an independence coupling on the energy
    score when the truth is strongly correlated."""
    from wverif import energy_score

    rng = np.random.default_rng(99)
    d, m, n = 3, 21, 200
    rho = 0.85
    cov = (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))
    chol = np.linalg.cholesky(cov)
    es_ecc = []
    es_ind = []
    for _ in range(n):
        y = chol @ rng.standard_normal(d)
        raw = (rng.standard_normal((m, d)) @ chol.T).T
        margins = [smooth_ensemble(Ensemble(raw[i])) for i in range(d)]
        coupled = ecc_reorder(margins, MvEnsemble(raw))
        es_ecc.append(energy_score(coupled, y).value)
        shuffled = np.stack([rng.permutation(coupled.members[i]) for i in range(d)])
        es_ind.append(energy_score(MvEnsemble(shuffled), y).value)
    assert np.mean(es_ecc) < np.mean(es_ind)
