"""Simulation of the canonical reversible diffusion attached to a target density.

The process is  dX = (1/2) sigma_f^2 grad log f(X) dt + sigma_f dW,  integrated
by plain Euler-Maruyama from stationary initial samples (no burn-in: callers
supply exact draws from the target).  Step-size accuracy is controlled by the
step-halving robustness protocol in the experiment drivers, not by a
higher-order integrator.

Reproducibility contract: the Gaussian increments for step t are the rows of a
single (n_traj, d) standard-normal draw from a counter-based Philox stream
keyed by (seed, t), row n belonging to trajectory n.  Any blocked/parallel
execution that regenerates the full step draw and slices its rows is
bit-identical to the serial run regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimConfig",
    "TrajectoryEnsemble",
    "NonFiniteStateError",
    "simulate_canonical",
    "sample_ou_lag_pairs",
    "step_increments",
]

_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)


class NonFiniteStateError(RuntimeError):
    """A trajectory left the finite range: the step size is too large for the score."""

    def __init__(self, trajectory, step, last_finite):
        self.trajectory = int(trajectory)
        self.step = int(step)
        self.last_finite = np.asarray(last_finite)
        super().__init__(
            f"non-finite state in trajectory {trajectory} at step {step}; "
            f"last finite state {np.array2string(self.last_finite, precision=4)} "
            "(reduce dt: the target's score is too stiff for this step size)"
        )


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings: N trajectories, step dt, T steps, moments of the target."""

    n_traj: int
    dt: float
    n_steps: int
    seed: int
    sigma_f_sq: float
    mean: np.ndarray
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.n_traj < 1 or self.n_steps < 1 or self.snapshot_stride < 1:
            raise ValueError("n_traj, n_steps, snapshot_stride must be >= 1")
        if not (self.dt > 0 and self.sigma_f_sq > 0):
            raise ValueError("dt and sigma_f_sq must be positive")
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))

    @property
    def n_snapshots(self):
        return self.n_steps // self.snapshot_stride + 1

    @property
    def dt_snapshot(self):
        return self.dt * self.snapshot_stride

    @classmethod
    def for_target(cls, target, n_traj, dt, t_phys, seed, snapshot_stride=1):
        """Fill moments from the target's analytic moments; steps = round(t_phys/dt)."""
        mean, _, sigma_f_sq = target.moments()
        return cls(n_traj=n_traj, dt=dt, n_steps=int(round(t_phys / dt)), seed=seed,
                   sigma_f_sq=sigma_f_sq, mean=mean, snapshot_stride=snapshot_stride)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Stored snapshots of N trajectories: data has shape (N, S, d), all finite."""

    data: np.ndarray
    dt_snapshot: float
    mean_used: np.ndarray
    sigma_f_sq: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError("data must have shape (n_traj, n_snapshots, d)")
        if not np.all(np.isfinite(data)):
            raise ValueError("ensemble contains non-finite snapshots")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mean_used", np.atleast_1d(np.asarray(self.mean_used, dtype=np.float64)))

    @property
    def n_traj(self):
        return self.data.shape[0]

    @property
    def n_snapshots(self):
        return self.data.shape[1]

    @property
    def dim(self):
        return self.data.shape[2]

    def subset(self, indices):
        """Ensemble restricted to the given trajectory indices (bootstrap views)."""
        return TrajectoryEnsemble(self.data[np.asarray(indices)], self.dt_snapshot,
                                  self.mean_used, self.sigma_f_sq)

    def pooled(self):
        """All snapshots stacked into one (N*S, d) sample matrix."""
        return self.data.reshape(-1, self.dim)


def step_increments(seed, step, n_traj, dim):
    """Standard-normal increments for one step; row n is trajectory n's draw."""
    key = np.array([np.uint64(seed) & _U64, np.uint64(step) & _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal((n_traj, dim))


def _first_bad_row(x):
    bad = ~np.isfinite(x).all(axis=1)
    return int(np.flatnonzero(bad)[0])


def simulate_canonical(oracle, init, config, noise_map=None):
    """Integrate the canonical diffusion from stationary initial samples.

    ``init`` rows must be draws from the target density (stationarity is the
    caller's responsibility).  ``noise_map``, when given, is applied to each
    step's (n, d) increment matrix before use; it exists so similarity-image
    simulations can rotate the ΔW stream consistently with the state map.

    Raises NonFiniteStateError (with trajectory, step, and the last finite
    state) the moment any trajectory leaves the finite range.
    """
    x = np.array(init, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("init must be (n_traj, d)")
    if x.shape != (config.n_traj, config.mean.shape[0]):
        raise ValueError(f"init shape {x.shape} does not match config "
                         f"({config.n_traj}, {config.mean.shape[0]})")
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError(_first_bad_row(x), 0, x[_first_bad_row(x)])

    n, d = x.shape
    half_sig_dt = 0.5 * config.sigma_f_sq * config.dt
    noise_scale = np.sqrt(config.sigma_f_sq * config.dt)

    snaps = np.empty((n, config.n_snapshots, d))
    snaps[:, 0, :] = x
    s_idx = 1
    for t in range(config.n_steps):
        z = step_increments(config.seed, t, n, d)
        if noise_map is not None:
            z = noise_map(z)
        x_next = x + half_sig_dt * oracle.score(x) + noise_scale * z
        if not np.all(np.isfinite(x_next)):
            bad = _first_bad_row(x_next)
            raise NonFiniteStateError(bad, t + 1, x[bad])
        x = x_next
        if (t + 1) % config.snapshot_stride == 0:
            snaps[:, s_idx, :] = x
            s_idx += 1
    snaps = snaps[:, :s_idx, :]  # drop unfilled tail when stride does not divide n_steps
    return TrajectoryEnsemble(data=snaps, dt_snapshot=config.dt_snapshot,
                              mean_used=config.mean, sigma_f_sq=config.sigma_f_sq)


def sample_ou_lag_pairs(sigma_sq, d, n_pairs, tau, seed):
    """Independent stationary lag pairs of the isotropic-Gaussian canonical diffusion.

    X0 rows are i.i.d. N(0, sigma_sq I); Xtau = e^(-tau/2) X0 + sqrt(sigma_sq
    (1 - e^(-tau))) Z with fresh Z.  Exact sampling, no discretization.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    rng = np.random.default_rng(seed)
    x0 = np.sqrt(sigma_sq) * rng.standard_normal((n_pairs, d))
    decay = np.exp(-tau / 2.0)
    xtau = decay * x0 + np.sqrt(sigma_sq * (1.0 - decay**2)) * rng.standard_normal((n_pairs, d))
    return x0, xtau
