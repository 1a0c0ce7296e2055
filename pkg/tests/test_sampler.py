"""Gibbs sampler: full-conditional oracles, invariants, reproducibility."""

import numpy as np
import pytest
from scipy import integrate, special, stats

from unideconv.kernels import ErrorKernel
from unideconv.model import Dataset, Hyperparams, LatentState, MixtureParams
from unideconv.rng import RngStream
from unideconv.sampler import (
    ChainConfig,
    SufficientStats,
    component_stats,
    init_state,
    mh_log_ratio,
    run_chain,
    run_chains,
    sweep,
    update_alpha_mh,
    update_beta,
    update_p,
    update_theta,
    update_x,
    update_z,
)


def small_data(n=20, seed=0, sigma=0.7):
    gen = RngStream(seed).generator
    x = gen.standard_t(5, n)
    w = x + gen.normal(0, sigma, n)
    return Dataset(w=w, sigma=np.full(n, sigma))


def valid_setup(n=20, K=2, seed=0):
    data = small_data(n, seed)
    hp = Hyperparams(K=K)
    state, params = init_state(data, hp, RngStream(seed, 9).generator)
    return data, hp, state, params


class TestInit:
    def test_invariants_hold(self):
        data, hp, state, params = valid_setup()
        assert np.all(np.abs(state.x) <= state.theta)
        assert np.all(state.theta > 0)
        assert np.all((state.z >= 0) & (state.z < hp.K))
        params.check_floor(hp.t)
        assert abs(params.p.sum() - 1.0) < 1e-12

    def test_fixed_seed_reproducible(self):
        data = small_data()
        hp = Hyperparams(K=3)
        s1, p1 = init_state(data, hp, RngStream(5).generator)
        s2, p2 = init_state(data, hp, RngStream(5).generator)
        assert np.array_equal(s1.x, s2.x)
        assert np.array_equal(s1.z, s2.z)
        assert np.array_equal(p1.alpha, p2.alpha)

    def test_label_range_and_simplex(self):
        data = small_data(n=3)
        hp = Hyperparams(K=2)
        state, params = init_state(data, hp, RngStream(1).generator)
        assert set(np.unique(state.z)).issubset({0, 1})
        assert abs(params.p.sum() - 1.0) < 1e-12


class TestUpdateX:
    def test_huge_theta_matches_untruncated_normal(self):
        n = 100_000
        data = Dataset(w=np.full(n, 0.8), sigma=np.full(n, 1.0))
        state = LatentState(x=np.zeros(n), theta=np.full(n, 1e8), z=np.zeros(n, dtype=int))
        x = update_x(state, None, data, ErrorKernel("normal"), RngStream(11).generator)
        assert stats.kstest(x, "norm", args=(0.8, 1.0)).pvalue > 0.01

    def test_centered_observation_gives_symmetric_draws(self):
        n = 100_000
        data = Dataset(w=np.zeros(n), sigma=np.ones(n))
        state = LatentState(x=np.zeros(n), theta=np.ones(n), z=np.zeros(n, dtype=int))
        x = update_x(state, None, data, ErrorKernel("normal"), RngStream(12).generator)
        pos = (x > 0).sum()
        assert stats.binomtest(pos, n).pvalue > 0.01

    def test_offset_observation_matches_rejection_oracle(self):
        n = 500_000
        data = Dataset(w=np.full(n, 2.0), sigma=np.full(n, 0.5))
        state = LatentState(x=np.zeros(n), theta=np.ones(n), z=np.zeros(n, dtype=int))
        x = update_x(state, None, data, ErrorKernel("normal"), RngStream(13).generator)
        gen = RngStream(14).generator
        raw = gen.normal(2.0, 0.5, 60 * n)
        oracle = raw[np.abs(raw) <= 1.0]
        assert len(oracle) > 100_000
        se = np.hypot(x.std() / np.sqrt(len(x)), oracle.std() / np.sqrt(len(oracle)))
        assert abs(x.mean() - oracle.mean()) <= 3 * se

    def test_degenerate_mass_clamps_with_warning(self, caplog):
        data = Dataset(w=np.array([50.0]), sigma=np.array([1.0]))
        state = LatentState(x=np.array([0.0]), theta=np.array([1e-3]), z=np.array([0]))
        with caplog.at_level("WARNING"):
            x = update_x(state, None, data, ErrorKernel("normal"), RngStream(15).generator)
        assert abs(x[0]) <= 1e-3
        assert x[0] > 0  # clamped toward the observation's sign
        assert any("clamp" in r.message for r in caplog.records)


class TestUpdateTheta:
    def test_zero_x_gives_plain_gamma(self):
        n = 1_000_000
        state = LatentState(x=np.zeros(n), theta=np.ones(n), z=np.zeros(n, dtype=int))
        params = MixtureParams(p=[1.0], alpha=[3.0], beta=[2.0])
        th = update_theta(state, params, RngStream(21).generator)
        # Ga(2, 2): mean 1
        assert abs(th.mean() - 1.0) < 3 * th.std() / np.sqrt(n)

    def test_truncated_case_matches_rejection_oracle(self):
        n = 500_000
        state = LatentState(
            x=np.full(n, 0.4), theta=np.full(n, 0.5), z=np.zeros(n, dtype=int)
        )
        params = MixtureParams(p=[1.0], alpha=[2.5], beta=[1.0])
        th = update_theta(state, params, RngStream(22).generator)
        gen = RngStream(23).generator
        raw = gen.gamma(1.5, 1.0, 6 * n)
        oracle = raw[raw >= 0.4][:n]
        se = np.hypot(th.std() / np.sqrt(len(th)), oracle.std() / np.sqrt(len(oracle)))
        assert abs(th.mean() - oracle.mean()) <= 3 * se

    def test_support_constraint(self):
        data, hp, state, params = valid_setup(n=200)
        th = update_theta(state, params, RngStream(24).generator)
        assert np.all(th >= np.abs(state.x))


class TestUpdateZ:
    def test_exchangeable_components_uniform(self):
        n = 200_000
        state = LatentState(x=np.zeros(n), theta=np.ones(n), z=np.zeros(n, dtype=int))
        params = MixtureParams(p=[0.5, 0.5], alpha=[3.0, 3.0], beta=[2.0, 2.0])
        z = update_z(state, params, RngStream(31).generator)
        freq = (z == 0).mean()
        assert abs(freq - 0.5) <= 3 * 0.5 / np.sqrt(n)

    def test_hand_computed_weight(self):
        # p equal, alpha equal(3), beta (1,4), theta 2:
        # w_k = beta_k^3 e^{-beta_k * 2};  P(Z=0) = e^{-2}/(e^{-2} + 64 e^{-8})
        n = 500_000
        state = LatentState(x=np.zeros(n), theta=np.full(n, 2.0), z=np.zeros(n, dtype=int))
        params = MixtureParams(p=[0.5, 0.5], alpha=[3.0, 3.0], beta=[1.0, 4.0])
        z = update_z(state, params, RngStream(32).generator)
        pred = np.exp(-2) / (np.exp(-2) + 64 * np.exp(-8))
        freq = (z == 0).mean()
        assert abs(freq - pred) <= 3 * np.sqrt(pred * (1 - pred) / n)

    def test_zero_weight_component_never_selected(self):
        n = 50_000
        state = LatentState(x=np.zeros(n), theta=np.ones(n), z=np.zeros(n, dtype=int))
        params = MixtureParams(p=[1.0, 0.0], alpha=[3.0, 3.0], beta=[2.0, 2.0])
        z = update_z(state, params, RngStream(33).generator)
        assert np.all(z == 0)


class TestUpdatePBeta:
    def test_p_posterior_mean(self):
        # Dirichlet(m/K + r) with K=2, m=20, r=(3,1): Dirichlet(13, 11)
        hp = Hyperparams(K=2)
        st = SufficientStats(r=np.array([3, 1]), s=np.array([2.0, 0.5]))
        gen = RngStream(41).generator
        draws = np.array([update_p(st, hp, gen)[0] for _ in range(200_000)])
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(draws.mean() - 13 / 24) <= 3 * se

    def test_p_sums_to_one(self):
        hp = Hyperparams(K=4)
        st = SufficientStats(r=np.array([5, 0, 3, 2]), s=np.array([1.0, 0.0, 2.0, 1.0]))
        p = update_p(st, hp, RngStream(42).generator)
        assert abs(p.sum() - 1.0) < 1e-12

    def test_all_in_one_component_mean(self):
        hp = Hyperparams(K=3)
        n = 30
        st = SufficientStats(r=np.array([n, 0, 0]), s=np.array([10.0, 0.0, 0.0]))
        gen = RngStream(43).generator
        draws = np.array([update_p(st, hp, gen)[0] for _ in range(100_000)])
        expected = (hp.m / hp.K + n) / (hp.m + n)
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(draws.mean() - expected) <= 3 * se

    def test_beta_posterior_mean(self):
        # Ga(xi1 + alpha r, xi2 + s) with xi=(1,4), alpha=3, r=2, s=5: Ga(7, 9)
        hp = Hyperparams(K=1)
        st = SufficientStats(r=np.array([2]), s=np.array([5.0]))
        params = MixtureParams(p=[1.0], alpha=[3.0], beta=[1.0])
        gen = RngStream(44).generator
        draws = np.array([update_beta(st, params, hp, gen)[0] for _ in range(200_000)])
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(draws.mean() - 7 / 9) <= 3 * se

    def test_empty_component_reverts_to_prior(self):
        hp = Hyperparams(K=1, xi1=2.0, xi2=3.0)
        st = SufficientStats(r=np.array([0]), s=np.array([0.0]))
        params = MixtureParams(p=[1.0], alpha=[3.0], beta=[1.0])
        gen = RngStream(45).generator
        draws = np.array([update_beta(st, params, hp, gen)[0] for _ in range(200_000)])
        assert stats.kstest(draws, "gamma", args=(2.0, 0, 1 / 3.0)).pvalue > 0.001

    def test_beta_positive(self):
        data, hp, state, params = valid_setup()
        st = component_stats(state, hp.K)
        b = update_beta(st, params, hp, RngStream(46).generator)
        assert np.all(b > 0)


class TestAlphaMH:
    def test_identity_proposal_has_unit_ratio(self):
        hp = Hyperparams()
        assert mh_log_ratio(3.3, 3.3, 4, 1.7, 0.9, hp) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_log_ratio(self):
        # independent evaluation of target and truncated-proposal terms
        hp = Hyperparams()  # lam=2, t=2.5
        alpha, prop, r, beta, log_th = 3.0, 4.0, 2, 1.0, 0.7

        def log_target(a):
            return -r * special.gammaln(a) - a * (hp.lam - r * np.log(beta) - log_th)

        def log_q(y, center):
            rate = 2.0 / center
            norm = special.gammaincc(2.0, rate * hp.t)
            return np.log(rate**2 * y * np.exp(-rate * y) / norm)

        expected = (
            log_target(prop) - log_target(alpha) + log_q(alpha, prop) - log_q(prop, alpha)
        )
        got = mh_log_ratio(alpha, prop, r, beta, log_th, hp)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_empty_component_recovers_truncated_exponential_prior(self):
        hp = Hyperparams(K=1)
        st = SufficientStats(r=np.array([0]), s=np.array([0.0]))
        state = LatentState(x=np.array([0.0]), theta=np.array([1.0]), z=np.array([0]))
        gen = RngStream(51).generator
        alpha = np.array([3.0])
        kept = np.empty(100_000)
        for i in range(len(kept)):
            params = MixtureParams(p=[1.0], alpha=alpha, beta=[1.0])
            alpha, _ = update_alpha_mh(st, params, state, hp, gen)
            kept[i] = alpha[0]
        cdf = lambda v: -np.expm1(-hp.lam * np.maximum(v - hp.t, 0.0))
        assert stats.kstest(kept[1000::25], cdf).pvalue > 0.001

    def test_occupied_component_matches_quadrature_target(self):
        hp = Hyperparams(K=1)
        th = np.array([0.9, 1.4, 2.2, 0.5, 1.1])
        st = SufficientStats(r=np.array([len(th)]), s=np.array([th.sum()]))
        state = LatentState(x=np.zeros(len(th)), theta=th, z=np.zeros(len(th), dtype=int))
        beta = np.array([0.8])
        c = hp.lam - len(th) * np.log(beta[0]) - np.log(th).sum()

        def target(a):
            return np.where(a > hp.t, np.exp(-len(th) * special.gammaln(a) - a * c), 0.0)

        grid = np.linspace(hp.t, 60, 30_000)
        cdf_vals = integrate.cumulative_trapezoid(target(grid), grid, initial=0)
        cdf_vals /= cdf_vals[-1]
        gen = RngStream(52).generator
        alpha = np.array([3.0])
        kept = np.empty(300_000)
        for i in range(len(kept)):
            params = MixtureParams(p=[1.0], alpha=alpha, beta=beta)
            alpha, _ = update_alpha_mh(st, params, state, hp, gen)
            kept[i] = alpha[0]
        ks = stats.kstest(kept[3000::60], lambda v: np.interp(v, grid, cdf_vals))
        assert ks.pvalue > 0.001

    def test_result_stays_above_floor(self):
        data, hp, state, params = valid_setup()
        st = component_stats(state, hp.K)
        for i in range(50):
            a, acc = update_alpha_mh(st, params, state, hp, RngStream(53, i).generator)
            assert np.all(a > hp.t)


class TestSweepAndChain:
    def test_invariants_after_many_sweeps(self):
        data, hp, state, params = valid_setup(n=50, K=4, seed=3)
        gen = RngStream(61).generator
        kernel = ErrorKernel("normal")
        for _ in range(1000):
            state, params, _ = sweep(state, params, data, kernel, hp, gen)
        assert np.all(np.abs(state.x) <= state.theta)
        assert abs(params.p.sum() - 1.0) <= 1e-12
        assert np.all(params.alpha > hp.t)

    def test_fixed_seed_bit_identical_trajectory(self):
        data = small_data(n=30, seed=8)
        hp = Hyperparams(K=2)
        cfg = ChainConfig(n_iter=60, burn_in=10, thin=1, seed=99)
        d1 = run_chain(data, ErrorKernel("normal"), hp, cfg)
        d2 = run_chain(data, ErrorKernel("normal"), hp, cfg)
        for a, b in zip(d1.draws, d2.draws):
            assert np.array_equal(a.p, b.p)
            assert np.array_equal(a.alpha, b.alpha)
            assert np.array_equal(a.beta, b.beta)

    def test_kept_draw_count_arithmetic(self):
        data = small_data(n=10)
        cfg = ChainConfig(n_iter=100, burn_in=50, thin=5, seed=1)
        draws = run_chain(data, ErrorKernel("normal"), Hyperparams(K=2), cfg)
        assert len(draws) == 10

    def test_keep_latent_snapshots_align(self):
        data = small_data(n=12)
        cfg = ChainConfig(n_iter=30, burn_in=10, thin=2, seed=2)
        draws = run_chain(data, ErrorKernel("normal"), Hyperparams(K=2), cfg, keep_latent=True)
        assert len(draws.latent_x) == len(draws)
        assert all(v.shape == (12,) for v in draws.latent_x)

    def test_parallel_sites_deterministic(self):
        data = small_data(n=40, seed=4)
        hp = Hyperparams(K=2)
        cfg = ChainConfig(n_iter=40, burn_in=5, thin=1, seed=7, parallel_sites=True)
        d1 = run_chain(data, ErrorKernel("normal"), hp, cfg)
        d2 = run_chain(data, ErrorKernel("normal"), hp, cfg)
        for a, b in zip(d1.draws, d2.draws):
            assert np.array_equal(a.alpha, b.alpha)

    def test_accept_rate_in_unit_interval(self):
        data = small_data(n=30)
        cfg = ChainConfig(n_iter=200, burn_in=50, thin=1, seed=3)
        draws = run_chain(data, ErrorKernel("laplace"), Hyperparams(K=2), cfg)
        assert 0.0 < draws.accept_rate < 1.0

    def test_between_chain_agreement_at_zero(self):
        from unideconv.model import posterior_mean_density

        data = small_data(n=300, seed=12, sigma=0.8)
        hp = Hyperparams()
        cfg = ChainConfig(n_iter=1500, burn_in=500, thin=1, seed=100, n_chains=2)
        chains = run_chains(data, ErrorKernel("normal"), hp, cfg)
        grid = np.array([0.0])
        means, ses = [], []
        for ch in chains:
            vals = np.array([float(posterior_mean_density(
                type(ch)(draws=[d], burn_in=0, thin=1, seed=0), grid).values[0])
                for d in ch.draws[::10]])
            means.append(vals.mean())
            # batch-means SE over the thinned series
            nb = 10
            m = len(vals) // nb
            batches = vals[: nb * m].reshape(nb, m).mean(axis=1)
            ses.append(batches.std(ddof=1) / np.sqrt(nb))
        combined = float(np.hypot(*ses))
        assert abs(means[0] - means[1]) < 3 * combined


class TestStats:
    def test_component_stats_consistency(self):
        state = LatentState(
            x=np.array([0.1, -0.2, 0.0, 0.3]),
            theta=np.array([1.0, 2.0, 3.0, 4.0]),
            z=np.array([0, 1, 1, 0]),
        )
        st = component_stats(state, 3)
        assert np.array_equal(st.r, [2, 2, 0])
        assert np.allclose(st.s, [5.0, 5.0, 0.0])
        assert st.r.sum() == 4

    def test_invalid_stats_rejected(self):
        with pytest.raises(ValueError):
            SufficientStats(r=np.array([0]), s=np.array([1.0]))
