import math

import numpy as np
import pytest
from scipy import stats

from pccal.calibrate import (CalibrationConfig, HyperPrior, acceptance_probability,
                             gibbs_conditional, gibbs_draw_S, kde_marginal,
                             log_posterior, read_chain, run_mcmc, running_mean,
                             write_chain)
from pccal.errors import ConfigError, DomainError, EvaluationError, NumericalError
from pccal.parameters import ParameterSpace, ParameterSpec


@pytest.fixture()
def unit_space():
    return ParameterSpace([ParameterSpec(f"p{i}", 0.0, 1.0) for i in range(5)])


@pytest.fixture()
def bowl_config(unit_space):
    p_star = np.array([0.55, 0.45, 0.6, 0.5, 0.4])
    sig = np.full(5, 0.08)

    def bowl(p):
        return 0.5 * float(np.sum(((p - p_star) / sig) ** 2))

    cfg = CalibrationConfig(space=unit_space, surrogate=bowl, n_iters=1000,
                            burn_in=200, seed=0)
    return cfg, p_star, sig


def test_hyper_prior_moments():
    prior = HyperPrior()
    assert prior.alpha == 18.18 and prior.beta == 72.02
    assert prior.mean == pytest.approx(18.18 / 72.02)
    assert prior.variance == pytest.approx(18.18 / 72.02**2)
    assert round(prior.mean, 3) == 0.252


def test_hyper_prior_density_zero_below_zero():
    prior = HyperPrior()
    assert prior.log_pdf(-0.1) == -math.inf
    assert prior.log_pdf(0.0) == -math.inf
    assert math.isfinite(prior.log_pdf(0.25))


def test_hyper_prior_rejects_bad_parameters():
    with pytest.raises(DomainError):
        HyperPrior(alpha=0.0)
    with pytest.raises(DomainError):
        HyperPrior(beta=-1.0)


def test_log_posterior_outside_box(bowl_config):
    cfg, *_ = bowl_config
    p = np.full(5, 2.0)
    assert log_posterior(cfg, p, 0.5) == -math.inf
    assert log_posterior(cfg, np.full(5, 0.5), -1.0) == -math.inf


def test_log_posterior_ratio_identity(bowl_config):
    # lp(p, S1) - lp(p, S2) = (ke/2 + alpha - 1) ln(S1/S2) - (S1-S2)(E(p)+beta)
    cfg, *_ = bowl_config
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.uniform(0.05, 0.95, 5)
        s1, s2 = rng.uniform(0.01, 2.0, 2)
        cost = cfg.cost_function()(p)
        lhs = log_posterior(cfg, p, s1) - log_posterior(cfg, p, s2)
        rhs = ((cfg.ke / 2 + cfg.hyper.alpha - 1) * math.log(s1 / s2)
               - (s1 - s2) * (cost + cfg.hyper.beta))
        assert lhs == pytest.approx(rhs, abs=1e-12 * max(1, abs(rhs)))


def test_log_posterior_nonfinite_surrogate_raises(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: float("nan"),
                            n_iters=10, burn_in=1, seed=0)
    with pytest.raises(EvaluationError):
        log_posterior(cfg, np.full(5, 0.5), 0.5)


def test_gibbs_conditional_parameters(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: 325.62,
                            n_iters=10, burn_in=1, seed=0)
    shape, rate = gibbs_conditional(cfg, np.full(5, 0.5))
    assert shape == pytest.approx(17 / 2 + 18.18)
    assert rate == pytest.approx(325.62 + 72.02)
    assert shape / rate == pytest.approx(0.0671, abs=5e-5)


def test_gibbs_conditional_zero_cost(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: 0.0,
                            n_iters=10, burn_in=1, seed=0)
    shape, rate = gibbs_conditional(cfg, np.full(5, 0.5))
    assert shape / rate == pytest.approx((17 / 2 + 18.18) / 72.02)


def test_gibbs_degenerate_conditional_surfaced(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: -100.0,
                            n_iters=10, burn_in=1, seed=0)
    with pytest.raises(NumericalError):
        gibbs_draw_S(cfg, np.full(5, 0.5), np.random.default_rng(0))


def test_gibbs_draw_moment_check(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: 325.62,
                            n_iters=10, burn_in=1, seed=0)
    rng = np.random.default_rng(42)
    p = np.full(5, 0.5)
    draws = np.array([gibbs_draw_S(cfg, p, rng) for _ in range(100_000)])
    shape, rate = gibbs_conditional(cfg, p)
    mean, var = shape / rate, shape / rate**2
    se_mean = math.sqrt(var / len(draws))
    assert abs(draws.mean() - mean) <= 4 * se_mean
    kurt_excess = 6.0 / shape
    se_var = var * math.sqrt((2 + kurt_excess) / len(draws))
    assert abs(draws.var(ddof=1) - var) <= 4 * se_var


def test_acceptance_probability_shift_invariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        lp1, lp2 = rng.normal(size=2)
        shift = rng.normal() * 100
        a = acceptance_probability(lp1, lp2)
        b = acceptance_probability(lp1 + shift, lp2 + shift)
        assert abs(a - b) <= 1e-14


def test_config_validation(unit_space):
    with pytest.raises(ConfigError):
        CalibrationConfig(space=unit_space, surrogate=lambda p: 0.0,
                          n_iters=10, burn_in=10)
    with pytest.raises(ConfigError):
        CalibrationConfig(space=unit_space, surrogate=lambda p: 0.0,
                          n_iters=10, burn_in=2, proposal_scales=-0.1)
    with pytest.raises(ConfigError):
        CalibrationConfig(space=unit_space, surrogate=lambda p: 0.0,
                          n_iters=10, burn_in=2, ke=0.0)


def test_default_burn_in_is_twenty_percent(unit_space):
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: 0.0,
                            n_iters=1000, seed=0)
    assert cfg.burn_in == 200


def test_chain_reproducible(bowl_config):
    cfg, *_ = bowl_config
    a = run_mcmc(cfg)
    b = run_mcmc(cfg)
    assert np.array_equal(a.samples_p, b.samples_p)
    assert np.array_equal(a.samples_S, b.samples_S)
    assert np.array_equal(a.log_post, b.log_post)
    assert a.acceptance_rate == b.acceptance_rate


def test_chain_stays_in_box(bowl_config, unit_space):
    cfg, *_ = bowl_config
    chain = run_mcmc(cfg)
    assert np.all(chain.samples_p >= 0.0) and np.all(chain.samples_p <= 1.0)
    assert np.all(chain.samples_S > 0.0)


def test_prior_recovery_uniform_and_gamma(unit_space):
    # constant surrogate: p marginals uniform (KS on thinned, approximately
    # independent subsamples), S marginal Gamma(ke/2 + alpha, E + beta)
    const = 7.0
    cfg = CalibrationConfig(space=unit_space, surrogate=lambda p: const,
                            n_iters=125_000, burn_in=25_000, seed=6,
                            proposal_scales=0.5)
    chain = run_mcmc(cfg)
    p, s, _ = chain.post_burn_in()
    thin = p[::50]
    for i in range(5):
        ks = stats.kstest(thin[:, i], "uniform", args=(0.0, 1.0))
        assert ks.pvalue > 0.01, f"axis {i}: KS p = {ks.pvalue}"
    shape, rate = 17 / 2 + 18.18, const + 72.02
    mean, var = shape / rate, shape / rate**2
    n_eff = len(s) / 2  # Gibbs draws refresh S every sweep; mild correlation via p
    assert abs(s.mean() - mean) <= 4 * math.sqrt(var / n_eff)
    kurt = 6.0 / shape
    assert abs(s.var(ddof=1) - var) <= 4 * var * math.sqrt((2 + kurt) / n_eff)


def test_bowl_posterior_fixed_s(unit_space):
    p_star = np.array([0.55, 0.45, 0.6, 0.5, 0.4])
    sig = np.full(5, 0.08)

    def bowl(p):
        return 0.5 * float(np.sum(((p - p_star) / sig) ** 2))

    cfg = CalibrationConfig(space=unit_space, surrogate=bowl, n_iters=200_000,
                            burn_in=40_000, seed=5, tune=True, fix_s=1.0)
    chain = run_mcmc(cfg)
    assert np.all(chain.samples_S == 1.0)
    p, _, _ = chain.post_burn_in()
    assert np.all(np.abs(p.mean(axis=0) - p_star) <= 0.02 * p_star)
    cov = np.cov(p.T)
    assert np.all(np.abs(np.diag(cov) - sig**2) <= 0.10 * sig**2)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) <= 0.10 * sig[0] ** 2


def test_full_gibbs_s_marginal_matches_grid_oracle():
    # m = 2 bowl with free S: compare the S-chain density to numerical
    # integration of the joint over p on a dense grid
    space = ParameterSpace([ParameterSpec("a", 0.0, 1.0),
                            ParameterSpec("b", 0.0, 1.0)])
    p_star = np.array([0.5, 0.55])
    sig = np.array([0.15, 0.12])

    def bowl(p):
        return 0.5 * float(np.sum(((p - p_star) / sig) ** 2))

    cfg = CalibrationConfig(space=space, surrogate=bowl, n_iters=400_000,
                            burn_in=80_000, seed=9, proposal_scales=0.4)
    chain = run_mcmc(cfg)
    _, s, _ = chain.post_burn_in()

    # grid oracle for pi(S) ~ integral over the box of the joint density
    ke, alpha, beta = cfg.ke, cfg.hyper.alpha, cfg.hyper.beta
    g = np.linspace(0.005, 1.0, 60)[:, None]  # p grid per axis
    px, py = np.meshgrid(np.linspace(0, 1, 120), np.linspace(0, 1, 120),
                         indexing="ij")
    pts = np.column_stack([px.ravel(), py.ravel()])
    costs = np.array([bowl(row) for row in pts])
    s_grid = np.linspace(1e-3, s.max() + 0.2, 400)
    log_dens = ((ke / 2 + alpha - 1) * np.log(s_grid)[:, None]
                - s_grid[:, None] * (costs[None, :] + beta))
    dens = np.exp(log_dens - log_dens.max()).mean(axis=1)
    dens /= np.trapezoid(dens, s_grid)

    kde = kde_marginal(s, n_grid=400)
    oracle_on_kde_grid = np.interp(kde[:, 0], s_grid, dens, left=0.0, right=0.0)
    l1 = np.trapezoid(np.abs(kde[:, 1] - oracle_on_kde_grid), kde[:, 0])
    assert l1 <= 0.05


def test_running_mean_constant():
    chain = run_mcmc(CalibrationConfig(
        space=ParameterSpace([ParameterSpec("x", 0.0, 1.0)]),
        surrogate=lambda p: 1.0, n_iters=500, burn_in=100, seed=3,
        proposal_scales=1e-9, fix_s=2.0))
    rm = running_mean(chain)
    assert rm.shape == (500, 2)
    np.testing.assert_allclose(rm[:, 1], 2.0)
    np.testing.assert_allclose(rm[:, 0], rm[0, 0])


def test_running_mean_alternating():
    class FakeChain:
        samples_p = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        samples_S = np.array([1.0, 1.0, 1.0, 1.0])

    rm = running_mean(FakeChain())
    np.testing.assert_allclose(rm[:, 0], [1.0, 0.0, 1 / 3, 0.0], atol=1e-15)


def test_running_mean_converges_on_bowl(bowl_config):
    cfg, p_star, sig = bowl_config
    cfg = CalibrationConfig(space=cfg.space, surrogate=cfg.surrogate,
                            n_iters=200_000, burn_in=40_000, seed=5,
                            tune=True, fix_s=1.0)
    chain = run_mcmc(cfg)
    rm = running_mean(chain)[:, :5]
    last = rm[-20_000:]
    drift = np.abs(last.max(axis=0) - last.min(axis=0))
    assert np.all(drift <= 0.01 * sig)


def test_kde_normal_peak():
    rng = np.random.default_rng(12)
    samples = rng.standard_normal(100_000)
    table = kde_marginal(samples)
    at_zero = table[np.argmin(np.abs(table[:, 0])), 1]
    assert abs(at_zero - 1 / math.sqrt(2 * math.pi)) <= 0.05 / math.sqrt(2 * math.pi)


def test_kde_integrates_to_one():
    rng = np.random.default_rng(13)
    for samples in (rng.standard_normal(5000), rng.uniform(0, 1, 5000),
                    rng.gamma(18.18, 1 / 72.02, 5000)):
        table = kde_marginal(samples)
        integral = np.trapezoid(table[:, 1], table[:, 0])
        assert abs(integral - 1.0) <= 1e-3


def test_kde_uniform_mass_on_support():
    rng = np.random.default_rng(14)
    table = kde_marginal(rng.uniform(0, 1, 10_000))
    inside = (table[:, 0] >= 0.0) & (table[:, 0] <= 1.0)
    mass = np.trapezoid(table[inside, 1], table[inside, 0])
    assert mass >= 0.95


def test_kde_is_sample_statistic():
    rng = np.random.default_rng(15)
    half = rng.standard_normal(5000)
    doubled = np.concatenate([half, half])
    np.testing.assert_allclose(kde_marginal(half), kde_marginal(doubled),
                               rtol=1e-12)


def test_kde_rejects_degenerate_and_tiny_samples():
    with pytest.raises(DomainError):
        kde_marginal(np.ones(50))
    with pytest.raises(NumericalError):
        kde_marginal(np.ones(500))


def test_chain_file_round_trip(tmp_path, bowl_config, unit_space):
    cfg, *_ = bowl_config
    chain = run_mcmc(cfg)
    path = tmp_path / "chain.txt"
    write_chain(path, chain, unit_space)
    names, p, s, header = read_chain(path)
    assert names == unit_space.names
    post_p, post_s, _ = chain.post_burn_in()
    np.testing.assert_array_equal(p, post_p)
    np.testing.assert_array_equal(s, post_s)
    assert int(header["burn_in"]) == cfg.burn_in
