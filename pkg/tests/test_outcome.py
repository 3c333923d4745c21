"""Wage-stage estimation: trimming, least squares, distribution regression."""

import numpy as np
import pytest

import seldecomp as sd
from seldecomp.errors import (CollinearDesignError, ConfigError,
                              EmptyTrimmedSampleError)

from conftest import ALPHA, GAMMA, hsm_params

# Monte Carlo SDs of the wage-stage coefficients at n=20000, from an
# 8-replication calibration run of this exact design (seeds 100-107)
LASF_SD = np.array([0.010, 0.006, 0.014, 0.013])


@pytest.fixture(scope="module")
def fitted(r_spec, w_spec_qnorm):
    sample = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.5), 20_000, seed=101)
    control = sd.estimate_control(sample, r_spec)
    out = sd.fit_outcome(sample, control, w_spec_qnorm)
    return sample, control, out


def test_trim_noop_rule_keeps_all_wage_observations(fitted):
    sample, control, _ = fitted
    idx = sd.trim_indices(sample, control, sd.TrimRule())
    assert np.array_equal(idx, np.flatnonzero(sample.wage_observed_mask))


def test_trim_below_minimum_hours_errors(fitted):
    sample, control, _ = fitted
    tiny = 0.5 * sample.hours[sample.hours > 0].min()
    with pytest.raises(EmptyTrimmedSampleError):
        sd.trim_indices(sample, control, sd.TrimRule(h_max=tiny))


def test_trim_lower_quartile_count(fitted):
    sample, control, _ = fitted
    pos = sample.hours[sample.hours > 0]
    q25 = float(np.quantile(pos, 0.25))
    idx = sd.trim_indices(sample, control,
                          sd.TrimRule(h_min_wage_sample=q25))
    expected = int(np.sum((sample.hours > q25) & sample.wage_observed_mask))
    assert idx.size == expected
    tie_mass = int(np.sum(pos == q25))
    assert abs(idx.size - 0.75 * pos.size) <= tie_mass + 1


def test_lasf_recovers_simulator_coefficients(fitted):
    # oracle: the data-generating (alpha, rho); tolerances are 3x the
    # calibrated Monte Carlo SDs above
    _, _, out = fitted
    truth = np.array([1.0, 0.5, -0.5, 0.5])
    assert np.all(np.abs(out.lasf_coefficients - truth) <= 3 * LASF_SD)


def test_lasf_normal_equations(fitted):
    sample, control, out = fitted
    sub = sample.subset(out.trimmed_indices)
    W = sd.build_design(sub, out.w_spec,
                        control_values=control.v_hat[out.trimmed_indices])
    resid = sub.log_wage - W @ out.lasf_coefficients
    score = W.T @ (sub.weights * resid) / sub.n
    assert np.max(np.abs(score)) <= 1e-8


def test_ldsf_rows_monotone_in_unit_interval(fitted):
    sample, control, out = fitted
    sub = sample.subset(out.trimmed_indices[:200])
    W = sd.build_design(sub, out.w_spec,
                        control_values=control.v_hat[out.trimmed_indices[:200]])
    curves = out.ldsf.curves(W)
    assert np.all((curves >= 0) & (curves <= 1))
    assert np.all(np.diff(curves, axis=1) >= 0)


def test_ldsf_self_consistency_at_median(fitted):
    # averaging each trimmed row's rearranged conditional CDF and inverting
    # at 0.5 reproduces the trimmed sample median within one grid step
    sample, control, out = fitted
    sub = sample.subset(out.trimmed_indices)
    W = sd.build_design(sub, out.w_spec,
                        control_values=control.v_hat[out.trimmed_indices])
    curve = (sub.weights[:, None] * out.ldsf.curves(W)).sum(0) / sub.weights.sum()
    q = sd.quantile_from_curve(out.ldsf.thresholds, curve, 0.5)
    med = float(np.quantile(sub.log_wage, 0.5))
    grid = out.ldsf.thresholds
    j = int(np.searchsorted(grid, q.value))
    step = grid[min(j + 1, grid.size - 1)] - grid[max(j - 1, 0)]
    assert abs(q.value - med) <= step


def test_constant_outcome_degenerates_cleanly(w_spec_qnorm):
    n = 200
    rng = np.random.default_rng(6)
    hours = np.concatenate([np.zeros(50), rng.uniform(100, 2000, n - 50)])
    lw = np.where(hours > 0, 1.7, np.nan)
    s = sd.MicroSample("g", hours, lw, rng.normal(size=(n, 2)), ("x1", "x2"))
    control = sd.estimate_control(s, sd.DesignSpec((sd.intercept(),)))
    out = sd.fit_outcome(s, control, w_spec_qnorm)
    coef = out.lasf_coefficients
    assert coef[0] == pytest.approx(1.7, abs=1e-8)
    assert np.max(np.abs(coef[1:])) <= 1e-8
    assert np.array_equal(out.ldsf.thresholds, [1.7])
    assert out.ldsf.degenerate[0] == 1
    row = np.zeros(coef.shape[0])
    assert sd.evaluate_cdf(out.ldsf, row, 1.7) == 1.0
    assert sd.evaluate_cdf(out.ldsf, row, 1.6) == 0.0
    assert sd.lasf_value(out, {"x1": 0.3, "x2": -1.0}, 0.4) == pytest.approx(1.7, abs=1e-8)


def test_lasf_value_qnorm_slope(fitted):
    # mu(x, 0.5) - mu(x, Phi(1)) = -rho_hat exactly under the qnorm design
    _, _, out = fitted
    from scipy.special import ndtr

    x = {"x1": 0.2, "x2": 1.0}
    diff = sd.lasf_value(out, x, 0.5) - sd.lasf_value(out, x, float(ndtr(1.0)))
    rho_hat = out.lasf_coefficients[-1]
    assert diff == pytest.approx(-rho_hat, abs=1e-10)
    assert abs(-diff - 0.5) <= 3 * LASF_SD[-1]


def test_lasf_value_indicator_difference():
    # two x rows differing in one indicator differ by that coefficient path
    rng = np.random.default_rng(13)
    n = 3000
    hours = np.concatenate([np.zeros(500), rng.uniform(10, 2000, n - 500)])
    flag = (rng.uniform(size=n) < 0.5).astype(float)
    x1 = rng.normal(size=n)
    lw = np.where(hours > 0, 1.0 + 0.3 * flag + 0.5 * x1 + rng.normal(size=n), np.nan)
    s = sd.MicroSample("g", hours, lw, np.column_stack([x1, flag]), ("x1", "flag"))
    control = sd.estimate_control(s, sd.DesignSpec(
        (sd.intercept(), sd.linear("x1"), sd.linear("flag"))))
    w_spec = sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("flag")),
                           sd.ControlSpec(linear=True, square=False,
                                          interactions=True))
    out = sd.fit_outcome(s, control, w_spec)
    v = 0.37
    d = (sd.lasf_value(out, {"x1": 0.0, "flag": 1.0}, v)
         - sd.lasf_value(out, {"x1": 0.0, "flag": 0.0}, v))
    cols = sd.design_columns(w_spec)
    beta = dict(zip(cols, out.lasf_coefficients))
    assert d == pytest.approx(beta["flag"] + v * beta["flag:v"], abs=1e-10)


def test_w_spec_without_control_is_rejected(fitted):
    sample, control, _ = fitted
    plain = sd.DesignSpec((sd.intercept(), sd.linear("x1")))
    with pytest.raises(ConfigError, match="control"):
        sd.fit_outcome(sample, control, plain)


def test_collinear_wage_design_names_columns(fitted):
    sample, control, _ = fitted
    spec = sd.DesignSpec((sd.intercept(), sd.linear("x1"), sd.linear("x1")),
                         sd.ControlSpec(False, False, False, True))
    with pytest.raises(CollinearDesignError) as exc:
        sd.fit_outcome(sample, control, spec)
    assert "x1" in "".join(exc.value.columns)


def test_missing_wage_workers_warn_and_are_counted(r_spec, w_spec_qnorm):
    sample = sd.simulate_hsm(hsm_params(ALPHA, GAMMA, 0.3), 2000, seed=51)
    lw = sample.log_wage.copy()
    workers = np.flatnonzero(sample.worker_mask)
    lw[workers[:25]] = np.nan
    s = sd.MicroSample("g", sample.hours, lw, sample.covariates,
                       sample.covariate_names)
    control = sd.estimate_control(s, r_spec)
    with pytest.warns(UserWarning, match="lack log_wage"):
        out = sd.fit_outcome(s, control, w_spec_qnorm)
    assert out.n_dropped_missing_wage == 25
    assert out.n_trimmed_in == workers.size - 25


def test_outcome_fit_round_trip(fitted):
    _, _, out = fitted
    back = sd.OutcomeFit.from_dict(out.to_dict())
    assert np.array_equal(back.lasf_coefficients, out.lasf_coefficients)
    assert np.array_equal(back.trimmed_indices, out.trimmed_indices)
    assert back.trim == out.trim
    assert np.array_equal(back.ldsf.coefficients, out.ldsf.coefficients)
