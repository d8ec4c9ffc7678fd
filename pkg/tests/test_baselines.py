import numpy as np
import pytest

from modesep.autocov import LagGrid, rho_series
from modesep.baselines import TicaConfig, gmm_mutual_information, knn_entropy, pca, tica
from modesep.da import da_at_lag, subspace_alignment
from modesep.dynamics import SimConfig, simulate_canonical
from modesep.nullspec import mp_edges
from modesep.targets import GmmSpec, IsoGaussian

from conftest import two_mode_gmm


class TestPca:
    def test_line_data(self):
        t = np.linspace(-1.0, 1.0, 100)
        direction = np.array([3.0, 4.0]) / 5.0
        data = np.outer(t, direction)
        vals, vecs = pca(data)
        assert vals[1] == pytest.approx(0.0, abs=1e-12)
        assert abs(vecs[:, 0] @ direction) == pytest.approx(1.0)

    def test_parallel_ellipses_pc1_is_variance_axis(self):
        means = np.array([[0.0, -3.0], [0.0, 3.0]])
        spec = GmmSpec([0.5, 0.5], means, np.stack([np.diag([25.0, 1.0])] * 2))
        vals, vecs = pca(spec.sample(5000, seed=0))
        assert abs(vecs[0, 0]) >= 0.95  # x-axis: within-mode variance 25 > inter-mode 10

    def test_iso_spectrum_inside_mp_bulk(self):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((1000, 50))
        vals, _ = pca(data)
        lo, hi = mp_edges(50 / 1000, 1.0)
        assert vals[0] <= hi * 1.10 and vals[-1] >= lo * 0.85

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            pca(np.zeros((1, 3)))


@pytest.fixture(scope="module")
def aniso_gaussian_run():
    spec = GmmSpec([1.0], np.zeros((1, 2)), np.diag([4.0, 1.0])[None])
    cfg = SimConfig.for_target(spec, n_traj=3000, dt=0.01, t_phys=10.0, seed=2,
                               snapshot_stride=10)
    ens = simulate_canonical(spec, spec.sample(3000, 3), cfg)
    return spec, ens


class TestTica:
    def test_ou_isotropic_all_equal(self):
        target = IsoGaussian(np.zeros(4), 1.0)
        cfg = SimConfig.for_target(target, n_traj=2000, dt=0.01, t_phys=8.0, seed=4,
                                   snapshot_stride=10)
        ens = simulate_canonical(target, target.sample(2000, 5), cfg)
        vals, _ = tica(ens, TicaConfig(lag=10))  # physical lag 1.0
        assert np.all(np.abs(vals - np.exp(-0.5)) < 0.05)

    def test_anisotropic_population_rates(self, aniso_gaussian_run):
        """Derived oracle: C(tau) = exp(-sigma_f^2 Sigma^-1 tau / 2) Sigma, so the
        per-axis autocorrelations are e^(-sigma_f^2 tau / (2 lam_i)).  The
        high-variance axis relaxes slower; TICA compresses the spread that
        DA/PCA show in raw eigenvalues."""
        spec, ens = aniso_gaussian_run
        sig = 2.5  # tr(diag(4,1))/2
        tau = 1.0
        vals, vecs = tica(ens, TicaConfig(lag=10))
        want = np.exp(-sig * tau / (2.0 * np.array([4.0, 1.0])))
        np.testing.assert_allclose(vals, want, atol=0.05)
        assert abs(vecs[0, 0]) > 0.95  # slowest direction = high-variance axis
        # contrast: DA eigenvalue ratio carries variance, TICA's does not
        from modesep.autocov import estimate_autocov, symmetrize
        da_vals, _ = da_at_lag(symmetrize(estimate_autocov(ens, 10, np.zeros(2))))
        assert da_vals[0] / da_vals[1] > 2.0 * vals[0] / vals[1]

    def test_invariance_under_linear_reparameterization(self, aniso_gaussian_run):
        _, ens = aniso_gaussian_run
        a = np.array([[2.0, 0.7], [-0.3, 1.1]])  # well-conditioned
        from modesep.dynamics import TrajectoryEnsemble
        moved = TrajectoryEnsemble(ens.data @ a.T, ens.dt_snapshot,
                                   a @ ens.mean_used, ens.sigma_f_sq)
        vals, _ = tica(ens, TicaConfig(lag=10, regularization_eps=0.0))
        vals_t, _ = tica(moved, TicaConfig(lag=10, regularization_eps=0.0))
        np.testing.assert_allclose(vals_t, vals, atol=1e-6)

    def test_two_mode_tica1_is_inter_mode_axis(self):
        spec = two_mode_gmm(sep=5.0, d=3, var=0.5)
        cfg = SimConfig.for_target(spec, n_traj=1500, dt=0.01, t_phys=20.0, seed=6,
                                   snapshot_stride=20)
        ens = simulate_canonical(spec, spec.sample(1500, 7), cfg)
        vals, vecs = tica(ens, TicaConfig(lag=10))
        assert abs(vecs[0, 0]) > 0.95

    def test_lag_validation(self):
        with pytest.raises(ValueError):
            TicaConfig(lag=0)

    def test_degenerate_c0_rejected(self):
        from modesep.dynamics import TrajectoryEnsemble
        ens = TrajectoryEnsemble(np.zeros((3, 10, 2)), 0.1, np.zeros(2), 1.0)
        with pytest.raises(ValueError, match="positive definite"):
            tica(ens, TicaConfig(lag=1, regularization_eps=0.0))


class TestMutualInformation:
    def test_identical_components_give_zero(self):
        spec = GmmSpec([0.5, 0.5], np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
        mi, se = gmm_mutual_information(spec, n_mc=20000, seed=0)
        assert mi <= max(3 * se, 1e-3)

    def test_saturates_at_label_entropy(self):
        spec = two_mode_gmm(sep=20.0, d=2)
        mi, se = gmm_mutual_information(spec, n_mc=20000, seed=1)
        assert mi == pytest.approx(np.log(2.0), abs=max(3 * se, 1e-3))

    def test_asymmetric_far_separated(self):
        spec = two_mode_gmm(sep=40.0, d=1, weights=(0.9, 0.1))
        mi, se = gmm_mutual_information(spec, n_mc=20000, seed=2)
        want = -(0.9 * np.log(0.9) + 0.1 * np.log(0.1))
        assert mi == pytest.approx(want, abs=max(3 * se, 1e-3))

    def test_bounds_respected(self):
        rng = np.random.default_rng(3)
        for trial in range(5):
            spec = two_mode_gmm(sep=float(rng.uniform(0, 6)), d=2,
                                weights=(0.3, 0.7))
            mi, _ = gmm_mutual_information(spec, n_mc=5000, seed=trial)
            assert 0.0 <= mi <= -(0.3 * np.log(0.3) + 0.7 * np.log(0.7)) + 1e-12

    def test_minimum_mc_count(self):
        with pytest.raises(ValueError):
            gmm_mutual_information(two_mode_gmm(), n_mc=10)


class TestKnnEntropy:
    def test_standard_gaussian_2d(self):
        x = np.random.default_rng(4).standard_normal((10000, 2))
        want = np.log(2 * np.pi * np.e)  # 2.8379
        assert knn_entropy(x, k=5) == pytest.approx(want, abs=0.05)

    def test_unit_square_uniform(self):
        x = np.random.default_rng(5).random((10000, 2))
        assert knn_entropy(x, k=5) == pytest.approx(0.0, abs=0.05)

    def test_dispersion_vs_fragmentation_ordering(self):
        rng = np.random.default_rng(6)
        iso = 5.0 * rng.standard_normal((10000, 2))
        means = np.array([[0.0, -3.0], [0.0, 3.0]])
        ell = GmmSpec([0.5, 0.5], means, np.stack([np.diag([25.0, 1.0])] * 2)).sample(10000, 7)
        h_iso, h_ell = knn_entropy(iso, k=5), knn_entropy(ell, k=5)
        assert h_iso == pytest.approx(6.06, abs=0.3)
        assert h_ell == pytest.approx(5.14, abs=0.3)
        assert h_iso > h_ell

    def test_shift_invariance(self):
        x = np.random.default_rng(8).standard_normal((2000, 3))
        assert abs(knn_entropy(x + 17.0, k=4) - knn_entropy(x, k=4)) < 1e-10

    def test_scaling_shifts_by_d_log_c(self):
        x = np.random.default_rng(9).standard_normal((5000, 2))
        got = knn_entropy(3.0 * x, k=5) - knn_entropy(x, k=5)
        assert got == pytest.approx(2 * np.log(3.0), abs=0.05)

    def test_duplicates_jittered(self):
        x = np.zeros((100, 2))
        x[50:] = 1.0
        h = knn_entropy(x, k=3)
        assert np.isfinite(h)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            knn_entropy(np.zeros((5, 2)), k=5)


class TestCrossModuleCoincidence:
    def test_pca_equals_lag_zero_directions(self, ou_run):
        ens, _, _ = ou_run
        pooled = ens.pooled()
        vals_p, _ = pca(pooled)
        from modesep.autocov import estimate_autocov
        vals_d, _ = da_at_lag(estimate_autocov(ens, 0, pooled.mean(axis=0)))
        np.testing.assert_allclose(vals_d, vals_p, atol=1e-8)
