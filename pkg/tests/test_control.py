"""Control-function stage: CDF values, selection thresholds, noise smoothing."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtri

import seldecomp as sd
from seldecomp.errors import ConfigError, DataError

from conftest import ALPHA, GAMMA, hsm_params

INTERCEPT_SPEC = sd.DesignSpec((sd.intercept(),))


def discrete_sample(n=5000, seed=0, group_id="g"):
    """Hours on {0, 1000, 2080} with probabilities (0.3, 0.3, 0.4)."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=n)
    hours = np.where(u < 0.3, 0.0, np.where(u < 0.6, 1000.0, 2080.0))
    lw = np.where(hours > 0, rng.normal(size=n), np.nan)
    return sd.MicroSample(group_id, hours, lw, np.ones((n, 1)), ("c",))


def test_intercept_only_v_hat_equals_empirical_cdf():
    # few enough distinct hour values that the grid holds all of them
    rng = np.random.default_rng(4)
    n = 1000
    hours = np.concatenate([np.zeros(300),
                            rng.choice(np.arange(40.0, 3000.0, 40.0), size=700)])
    w = rng.uniform(0.5, 2.0, size=n)
    s = sd.MicroSample("g", hours, np.where(hours > 0, 1.0, np.nan),
                       np.ones((n, 1)), ("c",), weights=w)
    fit = sd.estimate_control(s, INTERCEPT_SPEC)
    workers = np.flatnonzero(s.worker_mask)
    i = workers[np.argsort(hours[workers])[len(workers) // 2]]
    ecdf = np.sum(w * (hours <= hours[i])) / w.sum()
    assert fit.v_hat[i] == pytest.approx(ecdf, abs=1e-10)
    # p0 is the weighted nonworker share under the intercept-only design
    p0 = np.sum(w * (hours == 0)) / w.sum()
    assert fit.p0_hat[0] == pytest.approx(p0, abs=1e-10)


def test_p0_recovery_against_simulator_censoring_probability():
    # all observations share one covariate row; P(H=0) = 0.4 by construction
    gamma0 = float(ndtri(0.6))
    law = sd.CovariateLaw(("x1",), (sd.MixtureComponent(1.0, {"x1": ("point", 1.0)}),))
    params = sd.HSMParams([0.0, 0.0], [gamma0, 0.0], 0.0, ("x1",), ("x1",), law)
    sample = sd.simulate_hsm(params, 20_000, seed=31)
    fit = sd.estimate_control(sample, INTERCEPT_SPEC)
    se = np.sqrt(0.4 * 0.6 / sample.n)
    assert abs(fit.p0_hat[0] - 0.4) <= 3 * se


def test_v_hat_matches_rearranged_cdf_evaluation(r_spec):
    sample = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.3), 3000, seed=8)
    fit = sd.estimate_control(sample, r_spec)
    rows = sd.build_design(sample, r_spec)
    idx = np.flatnonzero(sample.worker_mask)[:50]
    for i in idx:
        v = sd.evaluate_cdf(fit.hours_fit, rows[i], sample.hours[i])
        assert v == pytest.approx(fit.v_hat[i], abs=1e-12)


def test_control_invariants_on_simulated_data(r_spec):
    sample = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.3), 4000, seed=9)
    fit = sd.estimate_control(sample, r_spec)
    workers = sample.worker_mask
    assert np.all(fit.v_hat[workers] > fit.p0_hat[workers])
    assert np.all((fit.v_hat[workers] > 0) & (fit.v_hat[workers] <= 1))
    assert np.all((fit.p0_hat >= 0) & (fit.p0_hat < 1))
    assert np.isnan(fit.v_hat[~workers]).all()
    # selection truncates the control value from below
    assert fit.v_hat[workers].mean() >= fit.p0_hat.mean()


def test_smoothing_spreads_mass_points_uniformly():
    s = discrete_sample(n=6000, seed=12)
    fit = sd.estimate_control(s, INTERCEPT_SPEC, smoothing_seed=99)
    assert fit.noise_smoothed
    at_top = s.hours == 2080.0
    smoothed = fit.v_hat[at_top]
    assert len(np.unique(smoothed)) == at_top.sum()  # ties broken a.s.
    lo = fit.v_hat_presmooth[s.hours == 1000.0][0]
    hi = fit.v_hat_presmooth[at_top][0]
    # uniform fill between the flanking CDF values
    ks = stats.kstest(smoothed, stats.uniform(lo, hi - lo).cdf)
    assert ks.pvalue > 0.01
    assert smoothed.min() >= lo and smoothed.max() <= hi


def test_smoothing_keeps_hours_order_within_identical_rows():
    s = discrete_sample(n=3000, seed=21)
    fit = sd.estimate_control(s, INTERCEPT_SPEC, smoothing_seed=5)
    v_low = fit.v_hat[s.hours == 1000.0]
    v_high = fit.v_hat[s.hours == 2080.0]
    assert v_low.max() < v_high.min()


def test_smoothing_is_reproducible():
    s = discrete_sample(n=1000, seed=3)
    a = sd.estimate_control(s, INTERCEPT_SPEC, smoothing_seed=7)
    b = sd.estimate_control(s, INTERCEPT_SPEC, smoothing_seed=7)
    c = sd.estimate_control(s, INTERCEPT_SPEC, smoothing_seed=8)
    assert np.array_equal(a.v_hat, b.v_hat, equal_nan=True)
    workers = s.worker_mask
    assert not np.array_equal(a.v_hat[workers], c.v_hat[workers])


def test_no_nonworkers_requires_pinned_p0():
    rng = np.random.default_rng(2)
    n = 500
    s = sd.MicroSample("g", rng.uniform(1, 2000, n), rng.normal(size=n),
                       np.ones((n, 1)), ("c",))
    with pytest.raises(DataError, match="no nonworkers"):
        sd.estimate_control(s, INTERCEPT_SPEC)
    fit = sd.estimate_control(s, INTERCEPT_SPEC, pinned_p0=0.0)
    assert np.all(fit.p0_hat == 0.0)
    assert np.all(fit.v_hat[s.worker_mask] > 0)


def test_pinned_p0_rejected_when_nonworkers_present():
    s = discrete_sample(n=200, seed=1)
    with pytest.raises(ConfigError, match="pinned_p0"):
        sd.estimate_control(s, INTERCEPT_SPEC, pinned_p0=0.1)


def test_control_spec_must_exclude_control_terms():
    s = discrete_sample(n=200, seed=1)
    bad = sd.DesignSpec((sd.intercept(),), sd.ControlSpec())
    with pytest.raises(ConfigError, match="control terms"):
        sd.estimate_control(s, bad)


def test_control_fit_round_trip_and_p0_on(r_spec):
    sample = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.3), 2000, seed=14)
    fit = sd.estimate_control(sample, r_spec)
    back = sd.ControlFit.from_dict(fit.to_dict())
    assert np.array_equal(back.v_hat, fit.v_hat, equal_nan=True)
    assert np.array_equal(back.p0_hat, fit.p0_hat)
    other = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.3), 500, seed=15,
                            group_id="other")
    p0 = fit.p0_on(other)
    p0_back = back.p0_on(other)
    assert np.array_equal(p0, p0_back)
    assert np.all((p0 > 0) & (p0 < 1))
