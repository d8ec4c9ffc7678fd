import numpy as np
import pytest

from modesep.nullspec import mp_edges
from modesep.stattests import (McNullResult, count_kde_modes, critical_bandwidth,
                               dip_pvalue, dip_statistic, empirical_pvalue,
                               matched_mc_null, silverman_test, trajectory_bootstrap)
from modesep.ssa import ssa_trajectory_bootstrap
from modesep.targets import GmmSpec

from conftest import two_mode_gmm


def ellipses_projections(n=10000, seed=0):
    means = np.array([[0.0, -3.0], [0.0, 3.0]])
    spec = GmmSpec([0.5, 0.5], means, np.stack([np.diag([25.0, 1.0])] * 2))
    draws = spec.sample(n, seed)
    return draws[:, 1], draws[:, 0]  # inter-mode axis, max-variance axis


class TestDipStatistic:
    def test_uniform_grid_is_nearly_flat(self):
        assert dip_statistic(np.linspace(0.0, 1.0, 1000)) <= 0.01

    def test_paired_points_maximal_for_n4(self):
        assert dip_statistic([0.0, 0.0, 1.0, 1.0]) == pytest.approx(0.25)
        # interpolating mass toward the middle reduces the dip (weakly:
        # it saturates at 1/8 once the modal interval degenerates)
        inner = [dip_statistic([0.0, 0.5 - w, 0.5 + w, 1.0]) for w in (0.4, 0.25, 0.1, 0.01)]
        assert all(d < 0.25 for d in inner)
        assert all(a >= b for a, b in zip(inner, inner[1:]))
        assert inner[-1] == pytest.approx(0.125)

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            dip_statistic([1.0, 2.0, 3.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dip_statistic([0.0, 1.0, np.nan, 2.0])

    def test_inter_mode_projection_value(self):
        # two-ellipse target projected on the inter-mode axis vs max-variance axis
        sep_axis, var_axis = ellipses_projections(10000, seed=3)
        assert dip_statistic(sep_axis) == pytest.approx(0.087, abs=0.015)
        assert dip_statistic(var_axis) == pytest.approx(0.002, abs=0.003)

    def test_affine_and_reflection_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(500)
        d = dip_statistic(x)
        assert dip_statistic(3.5 * x - 11.0) == pytest.approx(d, abs=1e-15)
        assert dip_statistic(-x) == pytest.approx(d, abs=1e-15)

    def test_constant_sample_has_zero_dip(self):
        assert dip_statistic([2.0, 2.0, 2.0, 2.0]) == 0.0


class TestDipPvalue:
    def test_bimodal_rejects(self):
        rng = np.random.default_rng(2)
        x = np.concatenate([rng.standard_normal(500) * 0.2,
                            rng.standard_normal(500) * 0.2 + 3.0])
        res = dip_pvalue(x, n_boot=2000, seed=4)
        assert res.p_value < 1e-3

    def test_gaussian_does_not_reject(self):
        res = dip_pvalue(np.random.default_rng(5).standard_normal(1000),
                         n_boot=1000, seed=6)
        assert res.p_value > 0.1

    def test_zero_boot_forbidden(self):
        with pytest.raises(ValueError):
            dip_pvalue(np.arange(10.0), n_boot=0)

    def test_deterministic(self):
        x = np.random.default_rng(7).standard_normal(200)
        a = dip_pvalue(x, n_boot=200, seed=8)
        b = dip_pvalue(x, n_boot=200, seed=8)
        assert a.p_value == b.p_value

    def test_add_one_convention_floor(self):
        x = np.concatenate([np.zeros(50), np.ones(50)]) + \
            1e-3 * np.random.default_rng(9).standard_normal(100)
        res = dip_pvalue(x, n_boot=99, seed=10)
        assert res.p_value == pytest.approx(1.0 / 100.0)


class TestSilverman:
    def test_two_clusters_reject(self):
        rng = np.random.default_rng(11)
        x = np.concatenate([rng.standard_normal(250) * 0.3,
                            rng.standard_normal(250) * 0.3 + 4.0])
        res = silverman_test(x, n_boot=300, seed=12)
        assert res.p_value < 0.01

    def test_gaussian_null(self):
        res = silverman_test(np.random.default_rng(13).standard_normal(500),
                             n_boot=300, seed=14)
        assert res.p_value > 0.1

    def test_asymmetric_mixture_where_dip_fails(self):
        # 85/15 mass split: the dip misses the light mode, the bandwidth test
        # still finds it
        rng = np.random.default_rng(7)
        x = np.concatenate([rng.standard_normal(510),
                            2.8 + 0.55 * rng.standard_normal(90)])
        assert dip_pvalue(x, n_boot=1000, seed=1).p_value > 0.1
        assert silverman_test(x, n_boot=300, seed=1).p_value < 0.05

    def test_degenerate_sample_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            silverman_test(np.ones(20), n_boot=10)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            silverman_test(np.arange(5.0))

    def test_critical_bandwidth_separates_modes(self):
        rng = np.random.default_rng(15)
        uni = rng.standard_normal(400)
        bi = np.concatenate([rng.standard_normal(200) * 0.3,
                             rng.standard_normal(200) * 0.3 + 5.0])
        assert critical_bandwidth(bi) > critical_bandwidth(uni)

    def test_mode_counter(self):
        x = np.concatenate([np.full(50, 0.0), np.full(50, 5.0)])
        assert count_kde_modes(x, bandwidth=0.3) == 2
        assert count_kde_modes(x, bandwidth=10.0) == 1


class TestTrajectoryBootstrap:
    def test_constant_statistic(self, ou_run):
        ens, _, _ = ou_run
        res = trajectory_bootstrap(ens, lambda e: 1.0, n_boot=20, seed=0)
        assert res.se == 0.0

    def test_single_replicate_flagged_degenerate(self, ou_run):
        ens, _, _ = ou_run
        res = trajectory_bootstrap(ens, lambda e: float(e.data.mean()), n_boot=1, seed=1)
        assert res.degenerate and res.se == 0.0

    def test_deterministic_replicates(self, ou_run):
        ens, _, _ = ou_run
        stat = lambda e: float(e.data.var())
        a = trajectory_bootstrap(ens, stat, n_boot=30, seed=2)
        b = trajectory_bootstrap(ens, stat, n_boot=30, seed=2)
        np.testing.assert_array_equal(a.replicates, b.replicates)

    def test_needs_two_trajectories(self):
        from modesep.dynamics import TrajectoryEnsemble
        ens = TrajectoryEnsemble(np.zeros((1, 4, 2)), 0.1, np.zeros(2), 1.0)
        with pytest.raises(ValueError):
            trajectory_bootstrap(ens, lambda e: 0.0, n_boot=5)

    def test_two_mode_ssa_standard_error(self, gmm_k2_run):
        # Reference two-mode run.  The tabulated 0.141 is a 10-seed standard
        # error of the mean; the per-run trajectory-bootstrap SE is larger by
        # ~sqrt(10) (~0.45, matching the measured seed-to-seed SD), so the
        # order-of-magnitude window is [0.05, 0.7].
        _, ens, series, rep = gmm_k2_run
        reps = ssa_trajectory_bootstrap(ens, series.grid, n_boot=2000, seed=3)
        se = float(np.std(reps, ddof=1))
        assert 0.05 <= se <= 0.7
        assert se == pytest.approx(0.141 * np.sqrt(10), rel=0.6)

    def test_generic_matches_fast_path_scale(self, ou_run):
        from modesep.autocov import rho_series
        from modesep.ssa import ssa_estimate
        ens, series, _ = ou_run
        grid = series.grid

        def stat(e):
            return ssa_estimate(rho_series(e, grid, center=e.mean_used,
                                           retain_matrices=False)).s_hat

        generic = trajectory_bootstrap(ens, stat, n_boot=40, seed=4)
        fast = ssa_trajectory_bootstrap(ens, grid, n_boot=400, seed=4)
        assert generic.se == pytest.approx(np.std(fast, ddof=1), rel=0.6)


class TestMatchedMcNull:
    @staticmethod
    def _cov_pipeline(samples, tau_star, seed):
        centered = samples - samples.mean(axis=0)
        return np.linalg.eigvalsh(centered.T @ centered / samples.shape[0])

    def test_identity_pipeline_matches_mp_edge_small_gamma(self):
        """Pipeline = sample-covariance eigenvalues; null quantile at the MP edge.

        Valid where the covariance-matching step does not compound: at small
        data aspect ratio Sigma_hat ~ I and the replicate spectrum is plain MP.
        """
        rng = np.random.default_rng(16)
        data = rng.standard_normal((2000, 20))
        null = matched_mc_null(data, tau_star=0.0, pipeline=self._cov_pipeline,
                               n_reps=150, seed=17)
        edge = mp_edges(20 / 2000, 1.0)[1]
        assert null.quantile(0, level=0.95) == pytest.approx(edge, rel=0.10)

    def test_identity_pipeline_compounds_at_large_gamma(self):
        """At gamma = 0.25 the estimated Sigma_hat is itself MP-noisy, so the
        matched null's edge is the two-layer (free multiplicative) edge, well
        above the naive MP edge.  Oracle: an independently seeded simulation
        of the same two-layer draw."""
        rng = np.random.default_rng(160)
        data = rng.standard_normal((200, 50))
        null = matched_mc_null(data, tau_star=0.0, pipeline=self._cov_pipeline,
                               n_reps=200, seed=18)
        q95 = null.quantile(0, level=0.95)
        oracle = []
        for rep in range(200):
            r2 = np.random.default_rng(10_000 + rep)
            base = r2.standard_normal((200, 50))
            sig = base.T @ base / 200
            draws = r2.standard_normal((200, 50)) @ np.linalg.cholesky(sig).T
            oracle.append(self._cov_pipeline(draws, 0.0, 0)[-1])
        assert q95 == pytest.approx(np.quantile(oracle, 0.95), rel=0.10)
        assert q95 > 1.2 * mp_edges(0.25, 1.0)[1]

    def test_thresholding_semantics(self):
        null = McNullResult(eigenvalues=np.linspace(1.0, 2.0, 100)[:, None], alpha=0.05)
        assert null.pvalue(10.0 * null.quantile(0), rank=0) == pytest.approx(1.0 / 101.0)

    def test_min_p_convention_and_string(self):
        null = McNullResult(eigenvalues=np.ones((100, 2)), alpha=0.05)
        assert null.pvalue(5.0, rank=0) == pytest.approx(1.0 / 101.0)
        assert null.pvalue_string(5.0, rank=0).startswith("<")
        assert not null.pvalue_string(0.5, rank=0).startswith("<")

    def test_deterministic(self):
        data = np.random.default_rng(18).standard_normal((50, 5))
        pipeline = lambda s, t, seed: np.linalg.eigvalsh(s.T @ s / s.shape[0])
        a = matched_mc_null(data, 0.0, pipeline, n_reps=20, seed=19)
        b = matched_mc_null(data, 0.0, pipeline, n_reps=20, seed=19)
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)


class TestEmpiricalPvalue:
    def test_ties_count_against_rejection(self):
        assert empirical_pvalue(1.0, np.array([0.5, 1.0, 2.0])) == pytest.approx(3.0 / 4.0)

    def test_extreme_observation(self):
        assert empirical_pvalue(99.0, np.zeros(9)) == pytest.approx(0.1)
