"""Weighted bootstrap: reproducibility, degeneracy, failure handling."""

import numpy as np
import pytest

import seldecomp as sd
from seldecomp.errors import ConfigError, EstimationError

from conftest import ALPHA, GAMMA, hsm_params

TAUS = (0.25, 0.5, 0.75)


@pytest.fixture(scope="module")
def null_pair():
    p = hsm_params(ALPHA, GAMMA, 0.4)
    s1 = sd.simulate_hsm(p, 2000, seed=201, group_id="g1")
    s0 = sd.simulate_hsm(p, 2000, seed=202, group_id="g0")
    return s1, s0


def run_boot(s1, s0, cfg, r_spec, w_spec, n_threads=1):
    return sd.two_group_bootstrap(s1, s0, r_spec=r_spec, w_spec=w_spec,
                                  taus=TAUS, cfg=cfg, n_threads=n_threads)


def test_config_validation():
    with pytest.raises(ConfigError):
        sd.BootstrapConfig(1, seed=0)
    with pytest.raises(ConfigError):
        sd.BootstrapConfig(10, seed=0, ci_level=1.0)
    with pytest.raises(ConfigError):
        sd.BootstrapConfig(10, seed=0, weight_law="cauchy")


def test_unit_weights_degenerate_to_point(null_pair, r_spec, w_spec_qnorm):
    s1, s0 = null_pair
    res = run_boot(s1, s0, sd.BootstrapConfig(5, seed=1, weight_law="unit"),
                   r_spec, w_spec_qnorm)
    for b in range(res.replicates.shape[0]):
        assert np.array_equal(res.replicates[b], res.point)
    assert np.array_equal(res.ci_lo, res.point)
    assert np.array_equal(res.ci_hi, res.point)
    assert res.n_fail == 0


def test_replicates_reproducible_and_prefix_stable(null_pair, r_spec, w_spec_qnorm):
    s1, s0 = null_pair
    a = run_boot(s1, s0, sd.BootstrapConfig(6, seed=7), r_spec, w_spec_qnorm)
    b = run_boot(s1, s0, sd.BootstrapConfig(6, seed=7), r_spec, w_spec_qnorm)
    assert np.array_equal(a.replicates, b.replicates)
    doubled = run_boot(s1, s0, sd.BootstrapConfig(12, seed=7), r_spec, w_spec_qnorm)
    assert np.array_equal(doubled.replicates[:6], a.replicates)
    other = run_boot(s1, s0, sd.BootstrapConfig(6, seed=8), r_spec, w_spec_qnorm)
    assert not np.array_equal(other.replicates, a.replicates)


def test_threaded_run_matches_serial(null_pair, r_spec, w_spec_qnorm):
    s1, s0 = null_pair
    serial = run_boot(s1, s0, sd.BootstrapConfig(4, seed=3), r_spec, w_spec_qnorm)
    threaded = run_boot(s1, s0, sd.BootstrapConfig(4, seed=3), r_spec,
                        w_spec_qnorm, n_threads=4)
    assert np.array_equal(serial.replicates, threaded.replicates)


def test_telescoping_holds_within_every_replicate(null_pair, r_spec, w_spec_qnorm):
    s1, s0 = null_pair
    res = run_boot(s1, s0, sd.BootstrapConfig(8, seed=5), r_spec, w_spec_qnorm)
    resid = res.replicates[..., :3].sum(axis=-1) - res.replicates[..., 3]
    assert np.max(np.abs(resid)) <= 1e-12


def test_ci_endpoints_are_order_statistics(null_pair, r_spec, w_spec_qnorm):
    s1, s0 = null_pair
    res = run_boot(s1, s0, sd.BootstrapConfig(10, seed=11), r_spec, w_spec_qnorm)
    for i in range(res.point.shape[0]):
        for j in range(res.point.shape[1]):
            col = res.replicates[:, i, j]
            assert res.ci_lo[i, j] in col
            assert res.ci_hi[i, j] in col
            assert res.ci_lo[i, j] <= res.ci_hi[i, j]


def test_failed_replicates_skipped_with_warning():
    calls = {"n": 0}

    def estimator(wmap):
        if wmap is None:
            return np.zeros((2, 4))
        calls["n"] += 1
        # weights are reproducible per b, so failure is deterministic too
        if wmap["g"][0] > 3.5:
            raise EstimationError("synthetic failure")
        return np.full((2, 4), wmap["g"].mean())

    cfg = sd.BootstrapConfig(50, seed=21)
    with pytest.warns(UserWarning, match="replicates failed"):
        res = sd.bootstrap_decomposition(estimator, {"g": 40}, ("a", "b"), cfg)
    assert 0 < res.n_fail <= 5
    assert res.replicates.shape[0] == 50 - res.n_fail
    assert len(res.replicate_ids) == 50 - res.n_fail


def test_too_many_failures_abort():
    def estimator(wmap):
        if wmap is None:
            return np.zeros((1, 4))
        raise EstimationError("always fails")

    with pytest.raises(EstimationError, match="bootstrap replicates failed"):
        sd.bootstrap_decomposition(estimator, {"g": 10}, ("a",),
                                   sd.BootstrapConfig(10, seed=1))


def test_null_study_components_within_3_se_and_ci_covers_zero(
        null_pair, r_spec, w_spec_qnorm):
    # identical simulator parameters: every component's truth is 0
    s1, s0 = null_pair
    res = run_boot(s1, s0, sd.BootstrapConfig(60, seed=31), r_spec, w_spec_qnorm)
    se = res.se
    assert np.all(np.abs(res.point) <= 3 * np.maximum(se, 1e-12))
    assert np.all((res.ci_lo <= 0) & (0 <= res.ci_hi))
