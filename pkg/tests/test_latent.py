import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chisquare, multivariate_normal

from gompertz_ssm.latent import (
    FullConditional,
    _gauss_hermite_log_norm,
    _sample_sites_vec,
    full_conditional,
    gibbs_sweep,
    log_target,
    optimal_proposal,
    sample_site,
    sir_draws,
    sir_initialize,
)
from gompertz_ssm.model import ModelParams, NoiseModel, simulate_latent, simulate_observations

P = ModelParams(theta1=2.0, theta2=0.22, b=-0.5)


def _dense_conditional(t, z, p):
    """Oracle: condition the dense joint Gaussian of (Z_1..Z_T) on all sites
    except t."""
    T = len(z)
    r = 1.0 + p.b
    cov = p.theta2 * np.array([[r ** abs(i - j) for j in range(T)] for i in range(T)])
    mean = np.full(T, p.theta1)
    rest = [i for i in range(T) if i != t]
    S_or = cov[np.ix_([t], rest)]
    S_rr = cov[np.ix_(rest, rest)]
    sol = np.linalg.solve(S_rr, z[rest] - mean[rest])
    mu = mean[t] + float((S_or @ sol).item())
    tau2 = cov[t, t] - float((S_or @ np.linalg.solve(S_rr, S_or.T)).item())
    return mu, tau2


class TestFullConditional:
    def test_matches_dense_gaussian_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            T = int(rng.integers(3, 9))
            p = ModelParams(rng.normal(), rng.uniform(0.1, 2), rng.uniform(-1.9, -0.1))
            z = rng.normal(p.theta1, 1.0, size=T)
            counts = rng.integers(0, 20, size=T)
            for t in range(T):
                fc = full_conditional(t, z, counts, p)
                mu, tau2 = _dense_conditional(t, z, p)
                assert fc.mu == pytest.approx(mu, abs=1e-10)
                assert fc.tau2 == pytest.approx(tau2, rel=1e-10)
                assert fc.n_obs == counts[t]

    def test_out_of_range_index(self):
        z = np.zeros(5)
        c = np.zeros(5, dtype=int)
        with pytest.raises(IndexError):
            full_conditional(5, z, c, P)
        with pytest.raises(IndexError):
            full_conditional(-1, z, c, P)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            FullConditional(mu=0.0, tau2=0.0, n_obs=1)
        with pytest.raises(ValueError):
            FullConditional(mu=0.0, tau2=1.0, n_obs=-1)


class TestOptimalProposal:
    def _cases(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            yield FullConditional(
                mu=float(rng.normal(0, 4)),
                tau2=float(10.0 ** rng.uniform(-3, 1)),
                n_obs=int(rng.integers(0, 10 ** 6)),
            )

    def test_mean_is_stationary_point(self):
        # the proposal mean solves n*tau2 + mu - xi = tau2 exp(xi)
        for fc in self._cases():
            prop = optimal_proposal(fc)
            lhs = fc.n_obs * fc.tau2 + fc.mu - prop.xi
            rhs = fc.tau2 * math.exp(prop.xi) if prop.xi < 700 else math.inf
            if prop.xi < 700:
                assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)

    def test_envelope_dominates_target(self):
        for fc in self._cases():
            prop = optimal_proposal(fc)
            grid = prop.xi + math.sqrt(prop.omega2) * np.linspace(-8, 8, 401)
            log_env = (
                -((grid - prop.xi) ** 2) / (2.0 * prop.omega2) + prop.log_bound
            )
            slack = 1e-9 * (1.0 + np.abs(log_env))
            assert np.all(log_target(grid, fc) <= log_env + slack)

    def test_bound_is_tight_at_maximizer(self):
        for fc in self._cases():
            prop = optimal_proposal(fc)
            kern = -((prop.z_hat - prop.xi) ** 2) / (2.0 * prop.omega2)
            assert log_target(prop.z_hat, fc) == pytest.approx(
                kern + prop.log_bound, rel=1e-12, abs=1e-9
            )

    def test_huge_count_no_overflow(self):
        fc = FullConditional(mu=0.0, tau2=0.5, n_obs=10 ** 9)
        prop = optimal_proposal(fc)
        assert math.isfinite(prop.xi) and math.isfinite(prop.log_bound)
        assert prop.xi == pytest.approx(math.log(10 ** 9), abs=0.1)


def _quadrature_bins(fc, edges):
    """Oracle bin probabilities of the normalized full conditional."""
    f = lambda z: math.exp(log_target(z, fc))
    support_lo = fc.mu - 40
    support_hi = max(fc.mu, math.log(fc.n_obs + 1)) + 40
    total, _ = quad(f, support_lo, support_hi, limit=200)
    probs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, _ = quad(f, max(lo, support_lo), min(hi, support_hi), limit=200)
        probs.append(v / total)
    return np.array(probs)


class TestSampleSite:
    @pytest.mark.parametrize(
        "mu,tau2,n_obs",
        [(0.0, 0.3, 0), (2.0, 0.15, 7), (-1.0, 1.0, 2)],
    )
    def test_chi_square_against_quadrature(self, mu, tau2, n_obs):
        fc = FullConditional(mu=mu, tau2=tau2, n_obs=n_obs)
        prop = optimal_proposal(fc)
        rng = np.random.default_rng(hash((n_obs, 99)) % 2 ** 32)
        n = 20_000
        draws = np.array([sample_site(fc, prop, rng)[0] for _ in range(n)])
        edges = np.quantile(draws, np.linspace(0, 1, 21))
        edges[0], edges[-1] = -np.inf, np.inf
        obs, _ = np.histogram(draws, bins=edges)
        expected = _quadrature_bins(fc, edges) * n
        stat, pval = chisquare(obs, expected * obs.sum() / expected.sum())
        assert pval > 0.001

    def test_acceptance_rate_reasonable(self):
        fc = FullConditional(mu=2.0, tau2=0.2, n_obs=5)
        prop = optimal_proposal(fc)
        rng = np.random.default_rng(3)
        attempts = [sample_site(fc, prop, rng)[1] for _ in range(2000)]
        assert np.mean(attempts) < 3.0

    def test_vectorized_matches_scalar_distribution(self):
        tau2, n_obs = 0.25, 4
        mus = np.full(30_000, 1.0)
        vec = _sample_sites_vec(mus, tau2, n_obs, np.random.default_rng(10))
        fc = FullConditional(mu=1.0, tau2=tau2, n_obs=n_obs)
        prop = optimal_proposal(fc)
        rng = np.random.default_rng(11)
        sca = np.array([sample_site(fc, prop, rng)[0] for _ in range(30_000)])
        assert vec.mean() == pytest.approx(sca.mean(), abs=0.02)
        assert vec.std() == pytest.approx(sca.std(), rel=0.05)


class TestGibbsSweep:
    def test_shapes_and_reproducibility(self):
        rng = np.random.default_rng(1)
        z = simulate_latent(P, 25, rng)
        counts = simulate_observations(z, NoiseModel.POISSON, rng)
        out1 = gibbs_sweep(z, counts, P, np.random.default_rng(5))
        out2 = gibbs_sweep(z, counts, P, np.random.default_rng(5))
        np.testing.assert_array_equal(out1, out2)
        assert out1.shape == z.shape
        assert not np.array_equal(out1, z)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            gibbs_sweep(np.zeros(5), np.zeros(4, dtype=int), P, np.random.default_rng(0))

    def test_invariance_t2(self):
        # exact-draw sweeps leave the T=2 conditional law invariant: chains
        # started from it must match quadrature marginal moments
        counts = np.array([3, 6])
        n_chains, n_sweeps = 4000, 6
        rng = np.random.default_rng(42)
        # start chains from an overdispersed cloud, then burn in via sweeps
        z = np.column_stack(
            [rng.normal(math.log(4), 1.0, n_chains), rng.normal(math.log(6), 1.0, n_chains)]
        )
        nat = P.natural()
        from gompertz_ssm.latent import _first_site_conditional

        for _ in range(n_sweeps):
            # vectorize by site: all chains share tau2/n_obs per site
            mu0 = np.array(
                [
                    _first_site_conditional(z2, P.theta1, P.theta2, nat.a, nat.r, nat.sigma2)[0]
                    for z2 in z[:, 1]
                ]
            )
            tau2_0 = _first_site_conditional(
                0.0, P.theta1, P.theta2, nat.a, nat.r, nat.sigma2
            )[1]
            z[:, 0] = _sample_sites_vec(mu0, tau2_0, int(counts[0]), rng)
            mu1 = nat.a + nat.r * z[:, 0]
            z[:, 1] = _sample_sites_vec(mu1, nat.sigma2, int(counts[1]), rng)

        mean_oracle, var_oracle = _t2_posterior_moments(counts, P)
        se = z[:, 0].std() / math.sqrt(n_chains)
        assert z[:, 0].mean() == pytest.approx(mean_oracle[0], abs=4 * se)
        se1 = z[:, 1].std() / math.sqrt(n_chains)
        assert z[:, 1].mean() == pytest.approx(mean_oracle[1], abs=4 * se1)


def _t2_posterior_moments(counts, p):
    """Quadrature oracle: posterior mean/var of (Z_1, Z_2) given two counts."""
    g = np.linspace(-6, 8, 701)
    z1, z2 = np.meshgrid(g, g, indexing="ij")
    nat = p.natural()
    logp = (
        -((z1 - p.theta1) ** 2) / (2 * p.theta2)
        - ((z2 - nat.a - nat.r * z1) ** 2) / (2 * nat.sigma2)
        + counts[0] * z1
        - np.exp(z1)
        + counts[1] * z2
        - np.exp(z2)
    )
    w = np.exp(logp - logp.max())
    w /= w.sum()
    means = np.array([(w * z1).sum(), (w * z2).sum()])
    variances = np.array(
        [(w * (z1 - means[0]) ** 2).sum(), (w * (z2 - means[1]) ** 2).sum()]
    )
    return means, variances


class TestGaussHermiteNorm:
    def test_matches_adaptive_quadrature(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            mu = float(rng.normal(0, 2))
            tau2 = float(10.0 ** rng.uniform(-2, 0.5))
            n_obs = int(rng.integers(0, 50))
            fc = FullConditional(mu=mu, tau2=tau2, n_obs=n_obs)
            prop = optimal_proposal(fc)
            peak = log_target(prop.xi, fc)
            ref, _ = quad(
                lambda z: math.exp(log_target(z, fc) - peak),
                prop.xi - 30 * math.sqrt(tau2),
                prop.xi + 30 * math.sqrt(tau2),
                limit=500,
                epsabs=1e-14,
                epsrel=1e-13,
            )
            got = _gauss_hermite_log_norm(
                np.array([mu]), tau2, n_obs, np.array([prop.xi])
            )[0]
            assert got == pytest.approx(math.log(ref) + peak, abs=1e-8)


class TestSir:
    def test_weights_normalized(self):
        rng = np.random.default_rng(2)
        z = simulate_latent(P, 20, rng)
        counts = simulate_observations(z, NoiseModel.POISSON, rng)
        draws, w = sir_draws(counts, P, 500, rng)
        assert draws.shape == (500, 20)
        assert w.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.all(w >= 0)

    def test_posterior_mean_t2_against_quadrature(self):
        counts = np.array([4, 9])
        draws, w = sir_draws(counts, P, 60_000, np.random.default_rng(31))
        mean_hat = w @ draws
        ess = 1.0 / np.sum(w ** 2)
        mean_oracle, var_oracle = _t2_posterior_moments(counts, P)
        se = np.sqrt(var_oracle / ess)
        np.testing.assert_array_less(np.abs(mean_hat - mean_oracle), 4 * se)

    def test_zero_counts_ok(self):
        counts = np.zeros(10, dtype=int)
        z = sir_initialize(counts, P, np.random.default_rng(0), n_draws=500)
        assert z.shape == (10,)
        assert np.all(np.isfinite(z))

    def test_bad_args(self):
        with pytest.raises(ValueError):
            sir_draws(np.array([1, 2]), P, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sir_draws(np.array([1, -2]), P, 10, np.random.default_rng(0))
