"""Parametric simulator and closed-form effect calculator."""

import numpy as np
import pytest

import seldecomp as sd
from seldecomp.errors import ConfigError

from conftest import ALPHA, GAMMA, hsm_params, standard_law, Z_NAMES

# reference values from a 50-digit mpmath evaluation of phi(u)/Phi(u)
MILLS_AT_0 = 0.7978845608028654
MILLS_AT_M40 = 40.024968847207264
MILLS_AT_M30 = 30.033259667433677


def test_inverse_mills_reference_values():
    assert abs(sd.inverse_mills(0.0) - MILLS_AT_0) <= 1e-12
    assert abs(sd.inverse_mills(-40.0) - MILLS_AT_M40) <= 1e-9
    assert abs(sd.inverse_mills(-30.0) - MILLS_AT_M30) <= 1e-9
    assert sd.inverse_mills(10.0) < 1e-20


def test_inverse_mills_monotone_positive_finite():
    u = np.linspace(-40.0, 40.0, 10_000)
    lam = sd.inverse_mills(u)
    assert np.all(np.isfinite(lam))
    assert lam[0] > 0  # stable at -40
    assert np.all(np.diff(lam) <= 0)
    # strictly decreasing wherever the value is representable; beyond
    # u ~ 38.6 the ratio underflows float64 (phi(u) < 5e-324)
    rep = lam > 1e-300
    assert np.all(np.diff(lam[rep]) < 0)
    assert np.all(lam[rep] > 0)


def test_simulate_no_censoring_with_huge_intercept():
    p = hsm_params(ALPHA, (8.0, 0.0, 0.0, 0.0, 0.0), 0.0)
    s = sd.simulate_hsm(p, 10_000, seed=1)
    assert s.worker_mask.mean() >= 1 - 1e-9
    assert sd.validate_sample(s).ok  # warn-only: no nonworkers


def test_simulate_half_censoring_with_zero_index():
    p = hsm_params(ALPHA, (0.0, 0.0, 0.0, 0.0, 0.0), 0.0)
    s = sd.simulate_hsm(p, 20_000, seed=2)
    se = np.sqrt(0.25 / s.n)
    assert abs(s.worker_mask.mean() - 0.5) <= 3 * se


def test_simulated_error_moments_match():
    # with no censoring both errors are reconstructible from the sample
    rho = 0.6
    p = hsm_params(ALPHA, (8.0, 0.0, 0.0, 0.0, 0.0), rho)
    s = sd.simulate_hsm(p, 50_000, seed=4)
    Z = s.covariates
    X = Z[:, :2]
    eta = s.hours - (8.0)
    eps = s.log_wage - (ALPHA[0] + X @ np.asarray(ALPHA[1:]))
    n = s.n
    assert abs(eps.mean()) <= 3 / np.sqrt(n)
    assert abs(eta.mean()) <= 3 / np.sqrt(n)
    assert abs(eps.var() - 1) <= 3 * np.sqrt(2 / n)
    assert abs(eta.var() - 1) <= 3 * np.sqrt(2 / n)
    corr = np.corrcoef(eps, eta)[0, 1]
    assert abs(corr - rho) <= 3 * (1 - rho**2) / np.sqrt(n)


def test_simulate_reproducible_and_n_validation():
    p = hsm_params(ALPHA, GAMMA, 0.3)
    a = sd.simulate_hsm(p, 500, seed=9)
    b = sd.simulate_hsm(p, 500, seed=9)
    assert np.array_equal(a.hours, b.hours)
    assert np.array_equal(a.log_wage, b.log_wage, equal_nan=True)
    assert np.array_equal(a.covariates, b.covariates)
    with pytest.raises(ConfigError):
        sd.simulate_hsm(p, 0, seed=1)


def test_counterfactual_mean_observed_triple_matches_selected_sample_mean():
    # independent check: the <t,t,t> mean is the selected population's mean
    # outcome, estimated here from a large physical simulation
    p = hsm_params(ALPHA, GAMMA, 0.5)
    est = sd.counterfactual_mean(p, p, p, draws=2_000_000, seed=4)
    s = sd.simulate_hsm(p, 400_000, seed=5)
    sel = s.log_wage[s.worker_mask]
    se = np.hypot(est.se, sel.std(ddof=1) / np.sqrt(sel.size))
    assert abs(est.value - sel.mean()) <= 3 * se


def test_counterfactual_mean_rho_zero_drops_selection_correction():
    p_t = hsm_params(ALPHA, GAMMA, 0.0)
    p_r = hsm_params(ALPHA, (0.4, *GAMMA[1:]), 0.3)
    est = sd.counterfactual_mean(p_t, p_r, p_r, draws=1_000_000, seed=6)
    # physical simulation of group r, averaging alpha'x over its workers
    s = sd.simulate_hsm(p_r, 400_000, seed=7)
    X = s.covariates[s.worker_mask][:, :2]
    mu = ALPHA[0] + X @ np.asarray(ALPHA[1:])
    se = np.hypot(est.se, mu.std(ddof=1) / np.sqrt(mu.size))
    assert abs(est.value - mu.mean()) <= 3 * se


def test_counterfactual_mean_self_consistency_across_draw_counts():
    p1 = hsm_params(ALPHA, GAMMA, 0.5)
    p0 = hsm_params((0.8, 0.4, -0.3), (0.5, *GAMMA[1:]), 0.2)
    a = sd.counterfactual_mean(p1, p0, p0, draws=10_000_000, seed=8)
    b = sd.counterfactual_mean(p1, p0, p0, draws=1_000_000, seed=9)
    assert abs(a.value - b.value) <= 3 * np.hypot(a.se, b.se)


def test_effects_vanish_exactly_for_identical_parameters():
    p = hsm_params(ALPHA, GAMMA, 0.4)
    eff = sd.closed_form_effects(p, p, draws=200_000, seed=10)
    assert eff.selection.value == 0.0
    assert eff.composition.value == 0.0
    assert eff.structural.value == 0.0
    assert eff.mr_selection.value == 0.0


def test_selection_effect_zero_when_rules_match_and_rho_zero():
    p1 = hsm_params(ALPHA, GAMMA, 0.0)
    p0 = hsm_params((0.2, 0.1, 0.3), GAMMA, 0.0)
    eff = sd.closed_form_effects(p1, p0, draws=200_000, seed=11)
    assert eff.selection.value == 0.0
    assert eff.mr_selection.value == 0.0


def test_rho_only_structural_effect_matches_brute_force():
    # brute force: physically simulate group 0 and average the structural
    # means over its selected draws (the control value is Phi(eta))
    rho1, rho0 = 0.5, 0.1
    p1 = hsm_params(ALPHA, GAMMA, rho1)
    p0 = hsm_params(ALPHA, GAMMA, rho0)
    eff = sd.closed_form_effects(p1, p0, draws=2_000_000, seed=12)

    n = 10_000_000
    s = sd.simulate_hsm(p0, n, seed=13)
    sel = s.worker_mask
    Z = s.covariates[sel]
    eta = s.hours[sel] - (GAMMA[0] + Z @ np.asarray(GAMMA[1:]))
    mu100 = (ALPHA[0] + Z[:, :2] @ np.asarray(ALPHA[1:]) + rho1 * eta).mean()
    mu000 = s.log_wage[sel].mean()
    brute = mu100 - mu000
    se_brute = (rho1 - rho0) * eta.std(ddof=1) / np.sqrt(sel.sum())
    assert abs(eff.structural.value - brute) <= 3 * np.hypot(eff.structural.se, se_brute)
    # and equals (rho1 - rho0) E[lambda(gamma'Z) | selected]
    lam = sd.inverse_mills(GAMMA[0] + Z @ np.asarray(GAMMA[1:]))
    want = (rho1 - rho0) * lam.mean()
    assert abs(eff.structural.value - want) <= 3 * np.hypot(
        eff.structural.se, (rho1 - rho0) * lam.std(ddof=1) / np.sqrt(lam.size))


def test_effects_telescope_exactly_with_common_draws():
    p1 = hsm_params(ALPHA, GAMMA, 0.5)
    p0 = hsm_params((0.8, 0.4, -0.3), (0.5, 0.4, -0.3, 0.5, 0.25), 0.2,
                    law=standard_law())
    draws, seed = 500_000, 14
    eff = sd.closed_form_effects(p1, p0, draws=draws, seed=seed)
    m111 = sd.counterfactual_mean(p1, p1, p1, draws=draws, seed=seed)
    m000 = sd.counterfactual_mean(p0, p0, p0, draws=draws, seed=seed)
    total = eff.selection.value + eff.composition.value + eff.structural.value
    assert abs(total - (m111.value - m000.value)) <= 1e-12
    assert eff.total == pytest.approx(total, abs=0)


def test_mr_selection_regroups_the_three_effects_when_alpha_is_zero():
    # with zero wage coefficients each effect reduces to its inverse-Mills
    # term, and their sum is the conventional selection quantity exactly
    p1 = hsm_params((0.0, 0.0, 0.0), GAMMA, 0.5)
    p0 = hsm_params((0.0, 0.0, 0.0), (0.5, 0.3, -0.2, 0.4, 0.2), 0.1)
    eff = sd.closed_form_effects(p1, p0, draws=300_000, seed=15)
    regrouped = (eff.selection.value + eff.composition.value
                 + eff.structural.value)
    assert abs(eff.mr_selection.value - regrouped) <= 1e-12


def test_multiplicative_variant_is_not_separately_identified():
    # in the multiplicative model the selected-population conditional mean is
    # (alpha'x) * rho * lambda(gamma'z): scaling alpha by c and rho by 1/c
    # changes nothing observable
    rng = np.random.default_rng(16)
    Z = rng.normal(size=(500, 4))
    X = np.column_stack([np.ones(500), Z[:, :2]])
    gamma = np.asarray(GAMMA)
    lam = sd.inverse_mills(gamma[0] + Z @ gamma[1:])

    def cond_mean(alpha, rho):
        return (X @ alpha) * rho * lam

    a = np.array([1.0, 0.5, -0.5])
    m1 = cond_mean(a, 0.4)
    m2 = cond_mean(3.0 * a, 0.4 / 3.0)
    assert np.allclose(m1, m2, atol=1e-14)


def test_law_and_params_validation():
    with pytest.raises(ConfigError, match="sum to 1"):
        sd.CovariateLaw(("a",), (sd.MixtureComponent(0.5, {"a": ("point", 1.0)}),))
    with pytest.raises(ConfigError, match="missing covariates"):
        sd.CovariateLaw(("a", "b"), (sd.MixtureComponent(1.0, {"a": ("point", 1.0)}),))
    with pytest.raises(ConfigError, match="rho"):
        hsm_params(ALPHA, GAMMA, 1.5)
    with pytest.raises(ConfigError, match="alpha"):
        sd.HSMParams([1.0], GAMMA, 0.0, ("x1", "x2"), Z_NAMES, standard_law())
    with pytest.raises(ConfigError, match="subset"):
        sd.HSMParams([1.0, 0.2], GAMMA, 0.0, ("nope",), Z_NAMES, standard_law())


def test_params_json_round_trip():
    p = hsm_params(ALPHA, GAMMA, 0.25)
    back = sd.HSMParams.from_dict(p.to_dict())
    assert np.array_equal(back.alpha, p.alpha)
    assert np.array_equal(back.gamma, p.gamma)
    assert back.rho == p.rho
    assert back.covariate_law == p.covariate_law
    s1 = sd.simulate_hsm(p, 200, seed=17)
    s2 = sd.simulate_hsm(back, 200, seed=17)
    assert np.array_equal(s1.hours, s2.hours)
