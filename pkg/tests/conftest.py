"""Shared fixtures and independent oracles for the test suite.

The finite-difference gradient here is the reference oracle for every score
implementation: it sees only log_density, never the score path it checks.
"""

import numpy as np
import pytest

from modesep.autocov import LagGrid, rho_series
from modesep.dynamics import SimConfig, simulate_canonical
from modesep.ssa import ssa_estimate
from modesep.targets import GmmSpec, IsoGaussian


def fd_gradient(log_density, x, h):
    """Central finite difference of a scalar field, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (log_density(x + step) - log_density(x - step)) / (2.0 * h)
    return grad


def assert_score_matches_fd(target, points, rel_tol=1e-5, h_rel=1e-5):
    """Every score oracle must agree with the FD gradient of its log-density."""
    scale = float(np.max(np.abs(points))) or 1.0
    h = h_rel * scale
    for x in points:
        got = target.score(x)
        want = fd_gradient(target.log_density, x, h)
        denom = max(np.linalg.norm(want), 1e-12)
        assert np.linalg.norm(got - want) / denom <= rel_tol, (
            f"score/FD mismatch at {x}: {got} vs {want}")


def two_mode_gmm(sep=4.0, d=10, var=1.0, weights=(0.5, 0.5)):
    mu = np.zeros((2, d))
    mu[0, 0], mu[1, 0] = -sep / 2.0, sep / 2.0
    return GmmSpec(list(weights), mu, np.stack([var * np.eye(d)] * 2))


def simulate_ssa(target, n_traj, dt, t_phys, stride, seed, init_seed):
    cfg = SimConfig.for_target(target, n_traj=n_traj, dt=dt, t_phys=t_phys,
                               seed=seed, snapshot_stride=stride)
    ens = simulate_canonical(target, target.sample(n_traj, init_seed), cfg)
    series = rho_series(ens, LagGrid.uniform(ens.n_snapshots, ens.dt_snapshot),
                        retain_matrices=False)
    return ens, series, ssa_estimate(series)


@pytest.fixture(scope="session")
def ou_run():
    """Isotropic-Gaussian reference run shared across modules."""
    target = IsoGaussian(np.zeros(10), 1.0)
    return simulate_ssa(target, n_traj=500, dt=0.01, t_phys=20.0, stride=1,
                        seed=0, init_seed=123)


@pytest.fixture(scope="session")
def gmm_k2_run():
    """Two-mode mixture at the reference configuration (variance 0.5, spacing 4)."""
    mu = np.zeros((2, 10))
    mu[1, 0] = 4.0
    spec = GmmSpec([0.5, 0.5], mu, np.stack([0.5 * np.eye(10)] * 2))
    ens, series, rep = simulate_ssa(spec, n_traj=200, dt=0.01, t_phys=200.0, stride=5,
                                    seed=0, init_seed=1000)
    return spec, ens, series, rep
