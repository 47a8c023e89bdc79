import math

import numpy as np
import pytest
from scipy import integrate, stats

from tailgibbs import ErrorDist, HierModel, SliceConfig, oracle
from tailgibbs.conditionals import (fresh_x_given_theta, sample_q_given_xy, sample_theta_given_u,
                                    sample_theta_given_x, sample_x_given_theta, sample_x_given_theta_q, x_draws,
                                    x_given_theta_q_moments)
from conftest import within_se

LETTERS = "CEGL"


def test_gg_x_conditional_exact(gg_model):
    x = x_draws(gg_model, 4.0, 10**5, np.random.default_rng(1))
    assert within_se(x, 2.0)
    v = x.var(ddof=1)
    assert abs(v - 0.5) <= 4 * 0.5 * math.sqrt(2.0 / x.size)


def test_ee_x_conditional_mean():
    m = HierModel.simple(ErrorDist.dexp(), ErrorDist.dexp())
    x = x_draws(m, 10.0, 10**4, np.random.default_rng(2))
    assert within_se(x, float(oracle.conditional_mean(m, 10.0)))
    assert within_se(x, 5.0)


def test_cg_x_tracks_theta(cg_model):
    x = x_draws(cg_model, 1e4, 10**4, np.random.default_rng(3))
    assert stats.kstest(x - 1e4, stats.norm(scale=math.sqrt(5)).cdf).statistic <= 0.02


def test_chained_x_draws_match_fresh(cg_model):
    m = HierModel.simple(ErrorDist.cauchy(), ErrorDist.cauchy())
    a = x_draws(m, 50.0, 20000, np.random.default_rng(4), fresh=False)
    grid = np.linspace(-5, 55, 121)
    emp = np.searchsorted(np.sort(a), grid, side="right") / a.size
    assert np.max(np.abs(emp - oracle.conditional_cdf(m, 50.0, grid))) <= 0.03


def test_sample_x_given_theta_replicated_rows():
    m = HierModel(ErrorDist.dexp(), ErrorDist.gauss(), ([0.0, 1.0], [5.0]))
    rng = np.random.default_rng(5)
    x = np.zeros(2)
    for _ in range(10):
        x = sample_x_given_theta(m, 1.0, x, rng)
    assert x.shape == (2,) and np.all(np.isfinite(x))
    with pytest.raises(ValueError):
        sample_x_given_theta(m, 1.0, np.zeros(3), rng)
    assert fresh_x_given_theta(m, 1.0, rng).shape == (2,)


@pytest.mark.parametrize("letter", LETTERS)
def test_theta_given_single_x_is_shifted_z2(letter):
    f2 = ErrorDist.from_letter(letter, scale=1.5)
    m = HierModel.simple(ErrorDist.gauss(), f2)
    rng = np.random.default_rng(6)
    d = np.array([sample_theta_given_x(m, [2.0], rng) for _ in range(10**5)]) - 2.0
    assert stats.kstest(d, f2.cdf).statistic <= 0.01


def test_theta_given_x_gaussian_conjugate():
    m = HierModel(ErrorDist.cauchy(), ErrorDist.gauss(2.0), ([0.0], [0.0]))
    rng = np.random.default_rng(7)
    t = np.array([sample_theta_given_x(m, [1.0, 3.0], rng) for _ in range(4 * 10**4)])
    assert within_se(t, 2.0)
    assert abs(t.var(ddof=1) - 2.0) <= 4 * 2.0 * math.sqrt(2.0 / t.size)


def test_theta_given_x_cauchy_product_median():
    m = HierModel(ErrorDist.gauss(), ErrorDist.cauchy(), ([0.0], [0.0], [0.0]))
    rng = np.random.default_rng(8)
    t, draws = 0.0, []
    for _ in range(2 * 10**4):
        t = sample_theta_given_x(m, [-1.0, 0.0, 1.0], rng, theta_start=t)
        draws.append(t)
    assert abs(np.median(draws)) <= 0.03


def test_theta_given_u_endpoints():
    m = HierModel.simple(ErrorDist.gauss(), ErrorDist.gauss())
    rng = np.random.default_rng(9)
    # rho = 0: density of f2(u - theta) -> N(u, 1)
    t0 = np.array([sample_theta_given_u(m, [1.0], 0.0, rng) for _ in range(2 * 10**4)])
    assert within_se(t0, 1.0)
    # rho = 0.5, y = 0: f1(-u - theta/2) f2(u - theta/2) -> precision 1/2, mean 0 for any u
    th = np.array([sample_theta_given_u(m, [0.7], 0.5, rng) for _ in range(2 * 10**4)])
    assert within_se(th, 0.0)
    assert abs(th.var(ddof=1) - 2.0) <= 4 * 2.0 * math.sqrt(2.0 / th.size)
    with pytest.raises(ValueError):
        sample_theta_given_u(m, [0.0], 1.2, rng)


def test_q_conditional_derived_rate():
    q = sample_q_given_xy(0.0, 0.0, np.random.default_rng(10), size=10**5)
    assert within_se(q, 2.0)
    q = sample_q_given_xy(1e3, 0.0, np.random.default_rng(11), size=10**5)
    assert np.mean(q > 1e-4) <= 0.01


def test_q_conditional_likelihood_rate():
    q = sample_q_given_xy(2.0, 0.0, np.random.default_rng(12), likelihood_rate=True, size=10**5)
    assert within_se(q, 0.5)
    with pytest.raises(ValueError):
        sample_q_given_xy(1.0, 1.0, np.random.default_rng(0), likelihood_rate=True)


def test_q_conditional_is_conjugate_posterior():
    # p(q | x, y) from the Ga(1/2, 1/2) prior times N(y - x; 0, 1/q) likelihood
    r = 1.7
    post = lambda q: stats.gamma(0.5, scale=2.0).pdf(q) * stats.norm(scale=1 / math.sqrt(q)).pdf(r)
    z, _ = integrate.quad(post, 0, np.inf)
    q = sample_q_given_xy(r, 0.0, np.random.default_rng(13), size=10**5)
    grid = np.linspace(0.05, 3.0, 60)
    cdf = np.array([integrate.quad(post, 0, g)[0] / z for g in grid])
    emp = np.searchsorted(np.sort(q), grid) / q.size
    assert np.max(np.abs(emp - cdf)) <= 0.01


def test_x_given_theta_q_moments():
    assert x_given_theta_q_moments(0.0, 4.0, 1.0) == pytest.approx((2.0, 0.5))
    assert x_given_theta_q_moments(4.0, 0.0, 3.0) == pytest.approx((3.0, 0.25))
    mean, var = x_given_theta_q_moments(7.0, 4.0, 1e-12)
    assert mean == pytest.approx(4.0, abs=1e-9) and var == pytest.approx(1.0, abs=1e-9)
    x = sample_x_given_theta_q(0.0, 4.0, 1.0, np.random.default_rng(14), size=10**5)
    assert within_se(x, 2.0)
    with pytest.raises(ValueError):
        x_given_theta_q_moments(0.0, 0.0, 0.0)


def test_grouped_conditionals_integrate_to_cauchy_model():
    """Integrating Q out of the augmented joint recovers f_theta(x) / c_theta."""
    y, theta, s2 = 0.0, 3.0, 1.0
    model = HierModel.simple(ErrorDist.cauchy(), ErrorDist.gauss(s2), y)
    prior = stats.gamma(0.5, scale=2.0)

    def lik(x):
        return integrate.quad(lambda q: prior.pdf(q) * stats.norm(scale=1 / math.sqrt(q)).pdf(y - x), 0, np.inf,
                              epsabs=1e-13, epsrel=1e-11, limit=200)[0]

    grid = np.linspace(-4, 8, 25)
    aug = np.array([lik(x) * stats.norm(theta, s2).pdf(x) for x in grid])
    c = oracle.normalizing_constant(model, theta)
    want = np.exp(model.f1.log_density(y - grid) + model.f2.log_density(grid - theta)) / c
    np.testing.assert_allclose(aug / c, want, atol=1e-6)


GRID_THETAS = (0.0, 5.0, 50.0)


@pytest.mark.parametrize("z2", LETTERS)
@pytest.mark.parametrize("z1", LETTERS)
def test_slice_draws_match_oracle(z1, z2):
    m = HierModel.simple(ErrorDist.from_letter(z1), ErrorDist.from_letter(z2))
    for i, theta in enumerate(GRID_THETAS):
        x = np.sort(x_draws(m, theta, 10**4, np.random.default_rng(100 + i)))
        grid = np.quantile(x, np.linspace(0.01, 0.99, 99))
        emp = np.searchsorted(x, grid, side="right") / x.size
        assert np.max(np.abs(emp - oracle.conditional_cdf(m, theta, grid))) <= 0.02, (z1, z2, theta)


def test_translation_equivariance():
    m = HierModel.simple(ErrorDist.cauchy(), ErrorDist.dexp(), 0.0)
    c = 37.5
    a = x_draws(m, 4.0, 2 * 10**4, np.random.default_rng(15))
    b = x_draws(m.shifted(c), 4.0 + c, 2 * 10**4, np.random.default_rng(16)) - c
    assert stats.ks_2samp(a, b).statistic <= 0.02


def test_slice_config_validation():
    with pytest.raises(ValueError):
        SliceConfig(max_shrink=10)
    with pytest.raises(ValueError):
        SliceConfig(initial_width=0.0)
    assert SliceConfig().width_for(HierModel.simple(ErrorDist.gauss(0.5), ErrorDist.cauchy(2.0))) == 2.0
