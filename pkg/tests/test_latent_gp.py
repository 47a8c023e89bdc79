import math

import numpy as np
import pytest
from scipy import stats

from tailgibbs import ErrorDist, LgpModel, MalaConfig, build_ar1_cov, mala_block_update, run_lgp_chain, theta_given_x
from tailgibbs.latent_gp import (coordinate_sampler, first_entry_time, grad_log_target, log_target,
                                 one_step_increments, simulate_data, theta_given_x_moments, tune_step_size)


@pytest.fixture(scope="module")
def small():
    model, _ = simulate_data(5, 0.9, 1.0, 0.0, seed=1)
    return model


def test_ar1_covariance():
    S = build_ar1_cov(4, 0.5, 2.0)
    assert S[0, 0] == pytest.approx(2.0) and S[0, 3] == pytest.approx(2.0 * 0.125)
    with pytest.raises(ValueError):
        build_ar1_cov(3, 1.0)


def test_model_validation():
    with pytest.raises(ValueError):
        LgpModel(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        LgpModel(np.eye(2), np.zeros(3))
    with pytest.raises(ValueError):
        LgpModel.from_json({"y": [0.0], "phi": 0.5, "bogus": 1})


def test_json_round_trip(small):
    back = LgpModel.from_json(small.to_json())
    np.testing.assert_array_equal(back.Sigma, small.Sigma)
    np.testing.assert_array_equal(back.y, small.y)
    dense = LgpModel.from_json({"Sigma": small.Sigma.tolist(), "y": small.y.tolist()})
    assert dense.one_prec_one == pytest.approx(small.one_prec_one, rel=1e-12)


def test_theta_given_x_against_dense_solve(small, rng):
    x = rng.standard_normal(small.p)
    P = np.linalg.inv(small.Sigma)
    one = np.ones(small.p)
    mean, var = theta_given_x_moments(small, x)
    assert mean == pytest.approx(one @ P @ x / (one @ P @ one), abs=1e-10)
    assert var == pytest.approx(1 / (one @ P @ one), abs=1e-10)
    draws = theta_given_x(small, np.tile(x, (40000, 1)), rng)
    assert abs(draws.mean() - mean) <= 4 * math.sqrt(var / draws.size)


def test_gradient_matches_finite_differences(small, rng):
    x = small.y + 0.5 * rng.standard_normal(small.p)
    g = grad_log_target(small, x, 0.3)
    h = 1e-6
    fd = np.array([(log_target(small, x + h * e, 0.3) - log_target(small, x - h * e, 0.3)) / (2 * h)
                   for e in np.eye(small.p)])
    np.testing.assert_allclose(g, fd, atol=1e-5, rtol=1e-5)


@pytest.mark.parametrize("f1", [ErrorDist.gauss(), ErrorDist.dexp(0.5), ErrorDist.exppower(1.0, 3.0)])
def test_gradient_other_laws(f1, rng):
    m = LgpModel.ar1(rng.standard_normal(3), 0.5, 1.0, f1)
    x = m.y + 0.3 + 0.4 * rng.standard_normal(3)
    g = grad_log_target(m, x, -0.2)
    h = 1e-6
    fd = np.array([(log_target(m, x + h * e, -0.2) - log_target(m, x - h * e, -0.2)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(g, fd, atol=1e-5, rtol=1e-5)


def test_tiny_step_always_accepts(small, rng):
    x = small.y.copy()
    _, rate = mala_block_update(small, np.tile(x, (200, 1)), 0.0, MalaConfig(step_size=1e-4), rng)
    assert rate >= 0.99
    with pytest.raises(ValueError):
        mala_block_update(small, np.zeros(small.p + 1), 0.0, MalaConfig(), rng)
    with pytest.raises(ValueError):
        MalaConfig(step_size=0.0)


def test_mala_matches_coordinate_sampler():
    model, _ = simulate_data(4, 0.7, 1.0, 0.0, seed=3)
    rng = np.random.default_rng(4)
    cfg = MalaConfig(step_size=0.5, n_inner=5)
    x = np.tile(model.y, (10**4, 1))
    for _ in range(100):
        x, _ = mala_block_update(model, x, 1.0, cfg, rng)
    ref = coordinate_sampler(model, 1.0, 10**5, np.random.default_rng(5), thin=10)
    for j in range(model.p):
        assert stats.ks_2samp(x[:, j], ref[:, j]).statistic <= 0.03, j


def test_far_theta_covariance_matches_prior():
    model, _ = simulate_data(6, 0.8, 1.0, 0.0, seed=6)
    rng = np.random.default_rng(7)
    theta = 1e4
    x = theta + model.sqrt_mul(rng.standard_normal((model.p, 20000))).T
    for _ in range(20):
        x, _ = mala_block_update(model, x, theta, MalaConfig(step_size=0.4), rng)
    C = np.cov((x - theta).T)
    assert np.linalg.norm(C - model.Sigma) / np.linalg.norm(model.Sigma) <= 0.05


def test_increments_far_out():
    model, _ = simulate_data(20, 0.9, 1.0, 0.0, seed=8)
    d = one_step_increments(model, 1e4, 5000, MalaConfig(step_size=0.3), np.random.default_rng(9))
    ref = stats.norm(scale=math.sqrt(2 / model.one_prec_one))
    assert stats.kstest(d, ref.cdf).statistic <= 0.03


def test_chain_determinism_and_meta(small):
    cfg = MalaConfig()
    a = run_lgp_chain(small, "centred", 3.0, cfg, 200, seed=2, burn_in=50)
    b = run_lgp_chain(small, "P0", 3.0, cfg, 200, seed=2, burn_in=50)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    assert a.kernel_id == "lgp-centred"
    assert 0 < a.meta["accept_rate_after_burn_in"] <= 1 and a.meta["final_step_size"] > 0
    with pytest.raises(ValueError):
        run_lgp_chain(small, "grouped", 0.0, cfg, 10, seed=0)


def test_adaptation_reaches_target(small):
    cfg = MalaConfig(step_size=2.0, n_inner=1)
    tr = run_lgp_chain(small, "centred", 0.0, cfg, 6000, seed=3, burn_in=2000)
    assert abs(tr.meta["accept_rate_after_burn_in"] - cfg.target_accept) <= 0.1
    assert tr.meta["final_step_size"] < 2.0
    eps = tune_step_size(small, 0.0, cfg, np.random.default_rng(1), n_adapt=500)
    assert 0.0 < eps < 2.0


def test_noncentred_returns_and_centred_stalls():
    model, _ = simulate_data(30, 0.9, 1.0, 0.0, seed=7)
    cfg = MalaConfig(step_size=0.19)
    t1 = first_entry_time(model, "noncentred", 500.0, 10.0, 50, cfg, seed=1)
    t0 = first_entry_time(model, "centred", 500.0, 10.0, 200, cfg, seed=1)
    assert t1 is not None and t1 <= 5
    assert t0 is None


def test_stationary_theta_agrees_between_samplers():
    model, _ = simulate_data(5, 0.5, 1.0, 0.0, seed=11)
    cfg = MalaConfig(step_size=0.6)
    a = run_lgp_chain(model, "centred", 0.0, cfg, 30000, seed=1, burn_in=500).thetas[500::5]
    b = run_lgp_chain(model, "noncentred", 0.0, cfg, 30000, seed=2, burn_in=500).thetas[500::5]
    assert stats.ks_2samp(a, b).statistic <= 0.05
