import functools
import math

import numpy as np
import pytest
from scipy import stats

from tailgibbs import ErrorDist, HierModel, Parametrisation, Trace, run_chain, step
from tailgibbs.kernels import ChainState, first_entry_time, initial_state, make_rng, one_step

P0, P1 = Parametrisation.centred(), Parametrisation.noncentred()


def test_same_seed_same_trace(cg_model):
    a = run_chain(P0, cg_model, 5.0, 500, seed=3)
    b = run_chain(P0, cg_model, 5.0, 500, seed=3)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    np.testing.assert_array_equal(a.xs, b.xs)
    c = run_chain(P0, cg_model, 5.0, 500, seed=4)
    assert not np.array_equal(a.thetas, c.thetas)


def test_chain_streams_are_independent(cg_model):
    a = run_chain(P1, cg_model, 0.0, 200, seed=1, chain_index=0)
    b = run_chain(P1, cg_model, 0.0, 200, seed=1, chain_index=1)
    assert not np.array_equal(a.thetas, b.thetas)
    first = make_rng(1, 0).standard_normal()
    assert first == np.random.Generator(np.random.PCG64(np.random.SeedSequence(1, spawn_key=(0,)))).standard_normal()


@pytest.mark.parametrize("rho,ref", [(0.0, P0), (1.0, P1)])
def test_partial_endpoints(rho, ref):
    m = HierModel.simple(ErrorDist.dexp(), ErrorDist.gauss(1.5), 0.4)
    a = run_chain(Parametrisation.partial(rho), m, 20.0, 300, seed=9)
    b = run_chain(ref, m, 20.0, 300, seed=9)
    np.testing.assert_allclose(a.thetas, b.thetas, rtol=0, atol=1e-9)


def _thinned(trace, thin=10, burn=100):
    return trace.thetas[burn::thin]


def test_gg_stationary_law(gg_model):
    th = _thinned(run_chain(P0, gg_model, 0.0, 10**5, seed=11, record_x=False))
    assert stats.kstest(th, stats.norm(scale=math.sqrt(2)).cdf).statistic <= 0.03


def test_cg_stationary_law(cg_model):
    rng = np.random.default_rng(0)
    n = 10**6
    ref = -(cg_model.f1.sample(rng, n) + cg_model.f2.sample(rng, n))
    th = _thinned(run_chain(P1, cg_model, 0.0, 2 * 10**5, seed=12, record_x=False))
    assert stats.ks_2samp(th, ref).statistic <= 0.03


def test_p0_and_p1_agree():
    m = HierModel.simple(ErrorDist.dexp(), ErrorDist.gauss(), 0.0)
    a = _thinned(run_chain(P0, m, 0.0, 10**5, seed=13, record_x=False))
    b = _thinned(run_chain(P1, m, 0.0, 10**5, seed=14, record_x=False))
    assert stats.ks_2samp(a, b).statistic <= 0.03


def test_hybrid_and_partial_stationary(gg_model):
    ref = stats.norm(scale=math.sqrt(2)).cdf
    for k, kern in enumerate((Parametrisation.hybrid(), Parametrisation.partial(0.3))):
        th = _thinned(run_chain(kern, gg_model, 0.0, 10**5, seed=20 + k, record_x=False))
        assert stats.kstest(th, ref).statistic <= 0.03, kern.kernel_id


def test_grouped_keeps_cauchy_x_marginal(cg_model):
    # with a flat prior X | y has the law of y - Z1
    tr = run_chain(Parametrisation.grouped(), cg_model, 0.0, 10**5, seed=15)
    x = tr.xs[100::10, 0]
    assert stats.kstest(x, stats.cauchy.cdf).statistic <= 0.03


def test_grouped_validation(gg_model):
    with pytest.raises(ValueError):
        run_chain(Parametrisation.grouped(), gg_model, 0.0, 10, seed=0)
    with pytest.raises(ValueError):
        Parametrisation("partial", rho=1.5)
    with pytest.raises(ValueError):
        Parametrisation("centred", p_mix=0.5)
    with pytest.raises(ValueError):
        Parametrisation("bogus")


def _exact_x_given_theta(theta, n, rng, s2=math.sqrt(5)):
    """Exact rejection draws for the Cauchy-Gaussian model with y = 0."""
    out = np.empty(0)
    while out.size < n:
        x = theta + s2 * rng.standard_normal(4 * n)
        keep = rng.random(x.size) < 1.0 / (1.0 + x * x)
        out = np.concatenate([out, x[keep]])
    return out[:n]


@pytest.mark.parametrize("theta0", [0.0, 30.0])
def test_cg_centred_transition_matches_exact_reference(cg_model, theta0):
    n = 20000
    th, xs = one_step(P0, cg_model, theta0, n, make_rng(5))
    rng = np.random.default_rng(6)
    x_ref = _exact_x_given_theta(theta0, n, rng)
    t_ref = x_ref + math.sqrt(5) * rng.standard_normal(n)
    assert stats.ks_2samp(xs[:, 0], x_ref).statistic <= 0.02
    assert stats.ks_2samp(th, t_ref).statistic <= 0.02


def test_step_and_state(cg_model, rng):
    s = initial_state(P1, cg_model, 2.0, rng)
    s2 = step(P1, cg_model, s, rng)
    assert s2 is not s and s.theta == 2.0 and math.isfinite(s2.theta)
    with pytest.raises(ValueError):
        step(P1, cg_model, ChainState(0.0, np.zeros(2)), rng)


def test_first_entry_time(gg_model):
    assert first_entry_time(P0, gg_model, 0.5, 1.0, 10, make_rng(0)) == 0
    n = first_entry_time(P0, gg_model, 1e3, 5.0, 200, make_rng(0))
    assert n is not None and 5 <= n <= 30
    cg = HierModel.simple(ErrorDist.cauchy(), ErrorDist.gauss(), 0.0)
    assert first_entry_time(P0, cg, 1e4, 10.0, 20, make_rng(0)) is None


def test_csv_round_trip(tmp_path, cg_model):
    tr = run_chain(P0, cg_model, 1.0, 50, seed=2, burn_in=5)
    path = tmp_path / "t.csv"
    text = tr.to_csv(path)
    assert text.splitlines()[1] == "iter,theta,x_1"
    back = Trace.from_csv(path)
    np.testing.assert_array_equal(back.thetas, tr.thetas)
    np.testing.assert_array_equal(back.xs, tr.xs)
    assert (back.seed, back.kernel_id, back.burn_in, back.theta0) == (2, "centred", 5, 1.0)
    assert path.read_bytes() == tr.to_csv().encode()


def test_trace_length_check():
    with pytest.raises(ValueError):
        Trace(np.zeros(3), None, 0, "centred", 4)
    with pytest.raises(ValueError):
        run_chain(P0, HierModel.simple(ErrorDist.gauss(), ErrorDist.gauss()), 0.0, 0, seed=0)


def test_replicated_model_chain():
    m = HierModel(ErrorDist.dexp(), ErrorDist.cauchy(), ([0.0, 1.0], [5.0, 4.0, 6.0]))
    tr = run_chain(P1, m, 0.0, 2000, seed=1)
    assert tr.xs.shape == (2000, 2) and np.all(np.isfinite(tr.thetas))


_FIXED_GRID = np.concatenate([-np.geomspace(0.5, 2000.0, 20)[::-1], [0.0], np.geomspace(0.5, 2000.0, 20)])


@functools.lru_cache(maxsize=None)
def _marginal_cdf(name):
    from tailgibbs import oracle

    s2 = math.sqrt(5.0) if name == "CG" else 1.0
    f1 = ErrorDist.cauchy() if name == "CG" else ErrorDist.gauss()
    return oracle.marginal_cdf(HierModel.simple(f1, ErrorDist.gauss(s2), 0.0), _FIXED_GRID)


@pytest.mark.parametrize("name,kernel", [("CG", P0), ("CG", P1), ("GG", P0)])
def test_oracle_marginal_is_a_fixed_point(name, kernel, cg_model, gg_model):
    """Chains started from the oracle marginal stay there after 10^3 steps."""
    from scipy.interpolate import PchipInterpolator

    model = cg_model if name == "CG" else gg_model
    grid, F = _FIXED_GRID, _marginal_cdf(name)
    keep = np.concatenate([[True], np.diff(F) > 1e-12])
    inv = PchipInterpolator(F[keep], grid[keep])
    u = np.random.default_rng(21).uniform(F[keep][0], F[keep][-1], 1000)
    # pool the states at iterations 100, 200, ..., 1000 of every chain
    pooled = np.concatenate([run_chain(kernel, model, float(t), 1000, seed=1000 + i, record_x=False).thetas[99::100]
                             for i, t in enumerate(inv(u))])
    emp = np.searchsorted(np.sort(pooled), grid, side="right") / pooled.size
    assert np.max(np.abs(emp - F)) <= 0.03
