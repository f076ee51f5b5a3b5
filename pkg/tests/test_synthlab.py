import numpy as np
import pytest
from numpy.testing import assert_allclose

from wverif import (
    ContractViolation,
    GaussCdf,
    IndicatorAbove,
    IndicatorBelow,
    Logistic,
    Normal,
    owcrps_bs,
    twcrps,
    vrcrps,
)
from wverif.synthlab import (
    ExperimentSpec,
    _GridScorer,
    run_experiment,
    run_ideal_forecaster,
    run_impropriety_demo,
    run_propriety_mc,
    run_score_curves,
    run_tail_forecasters,
)
from wverif.weights import CensorAbove


def test_grid_scorer_matches_pointwise_routes():
    """The batch grid scorer and the adaptive-quadrature routines are
    implemented independently; they must agree far below Monte Carlo
    resolution."""
    dist = Normal(0.3, 1.44)
    ys = np.array([-1.8, -0.2, 0.31, 0.9, 2.4])
    t = 0.31
    gs = _GridScorer(dist, ys, extra_points=[t, 0.0])

    crps_grid = gs.crps(ys)
    from wverif import crps_normal

    crps_pt = np.array([crps_normal(0.3, 1.2, y).value for y in ys])
    assert np.abs(crps_grid - crps_pt).max() < 1e-7

    w = GaussCdf(t, 1.2)
    tw_grid = gs.twcrps(ys, w)
    from wverif.weights import canonical_chaining

    chain = canonical_chaining(w)
    tw_pt = np.array([twcrps(dist, y, chain).value for y in ys])
    assert np.abs(tw_grid - tw_pt).max() < 1e-6

    ow_grid = gs.owcrps_bs(ys, t)
    ow_pt = np.array([owcrps_bs(dist, y, t).value for y in ys])
    assert np.abs(ow_grid - ow_pt).max() < 1e-6

    vr_grid = gs.vrcrps(ys, w, 0.0)
    vr_pt = np.array([vrcrps(dist, y, w, 0.0).value for y in ys])
    assert np.abs(vr_grid - vr_pt).max() < 1e-6


def test_grid_scorer_indicator_weights():
    dist = Logistic(-0.2, 0.9)
    ys = np.array([-2.0, -0.4, 0.31, 1.7])
    for t in (0.31, -0.5):
        gs = _GridScorer(dist, ys, extra_points=[t, 0.0])
        for w, chain in (
            (IndicatorAbove(t), CensorAbove(t)),
            (IndicatorBelow(t), None),
        ):
            tw_grid = gs.twcrps(ys, w)
            if chain is not None:
                tw_pt = np.array([twcrps(dist, y, chain).value for y in ys])
                assert np.abs(tw_grid - tw_pt).max() < 1e-6
            vr_grid = gs.vrcrps(ys, w, 0.0)
            vr_pt = np.array([vrcrps(dist, y, w, 0.0).value for y in ys])
            assert np.abs(vr_grid - vr_pt).max() < 1e-6


def test_score_curves_shapes():
    res = run_score_curves(t=1.0, ys=np.linspace(-3.0, 3.0, 61), x0=0.0)
    below = res.ys < 1.0
    assert np.ptp(res.twcrps[below]) < 1e-8
    assert np.ptp(res.vrcrps[below]) < 1e-8
    assert_allclose(res.owcrps[below], 0.0, atol=1e-12)
    assert np.all(res.crps > 0.0)
    # threshold-weighted score stays continuous across the threshold
    f = Normal(0.0, 1.0)
    eps = 1e-7
    gap = abs(
        twcrps(f, 1.0 + eps, CensorAbove(1.0)).value
        - twcrps(f, 1.0 - eps, CensorAbove(1.0)).value
    )
    assert gap < 1e-6


def test_ideal_forecaster_reduced():
    res = run_ideal_forecaster(n=20000, seed=101)
    from wverif import reliability_index

    assert res.pit_hist.n == 20000
    assert reliability_index(res.pit_hist) < 0.1
    assert reliability_index(res.cpit_hist) < 0.25
    # restriction to exceedances skews the histogram heavily upward
    assert reliability_index(res.restricted_hist) > 0.3
    freqs = res.restricted_hist.frequencies
    assert freqs[-1] > freqs[0]


def test_ideal_forecaster_reproducible():
    a = run_ideal_forecaster(n=5000, seed=7)
    b = run_ideal_forecaster(n=5000, seed=7)
    assert_allclose(a.pit_hist.counts, b.pit_hist.counts)
    c = run_ideal_forecaster(n=5000, seed=8)
    assert not np.allclose(a.pit_hist.counts, c.pit_hist.counts)


def test_ideal_forecaster_validates_sigma2():
    with pytest.raises(ContractViolation):
        run_ideal_forecaster(n=100, sigma2=1.5)


def test_tail_forecasters_reduced():
    res = run_tail_forecasters(n=50000, seed=5, corp_resamples=50)
    assert set(res.forecasters) == {"normal", "logistic", "student_t5"}
    # roughly 2.3 percent of outcomes exceed t = 2
    assert 800 < res.n_exceed < 1600
    from wverif import reliability_index

    ri = {k: reliability_index(v.cpit_hist) for k, v in res.forecasters.items()}
    assert ri["logistic"] < ri["normal"]
    assert ri["logistic"] < ri["student_t5"]
    nf = res.forecasters["normal"].cpit_hist.frequencies
    tf = res.forecasters["student_t5"].cpit_hist.frequencies
    assert nf[-1] > nf[0]
    assert tf[0] > tf[-1]
    for fc in res.forecasters.values():
        assert fc.corp.n == res.n


def test_propriety_mc_smoke():
    rows = run_propriety_mc(
        scores=["crps", "es"], n_pairs=3, n_uni=20000, n_mv=2000, m_members=20, seed=3
    )
    assert len(rows) == 6
    assert all(r.passed for r in rows)
    assert all(r.se_diff > 0.0 for r in rows)


def test_propriety_mc_rejects_unknown_score():
    with pytest.raises(ContractViolation):
        run_propriety_mc(scores=["nope"], n_pairs=2)


def test_impropriety_demo_reduced():
    res = run_impropriety_demo(n=30000, seed=11)
    assert res.naive_prefers_truncated
    assert res.tw_prefers_truth
    assert res.naive_trunc < res.naive_truth
    assert res.tw_truth < res.tw_trunc


def test_run_experiment_dispatch():
    res = run_experiment(
        ExperimentSpec("ideal_forecaster", {"n": 2000}, seed=42)
    )
    assert res.seed == 42
    assert res.n == 2000
    with pytest.raises(ContractViolation):
        run_experiment(ExperimentSpec("not_an_experiment"))
