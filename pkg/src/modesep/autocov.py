"""Trajectory-averaged lagged autocovariance and trace-normalized autocorrelation.

The lag-tau estimate over N trajectories of S stored snapshots is

    C_hat(tau) = 1/(N (S - tau)) sum_n sum_{t=0}^{S-1-tau}
                 (X_t - center)(X_{t+tau} - center)^T

with tau in snapshot units, and rho_hat(tau) = tr C_hat(tau) / tr C_hat(0).
Centering defaults to the analytic target mean when one is known (pooled
per-trajectory means zero out exactly the inter-mode signal on metastable
targets, so they are never used here).

Traces over the full lag range come from an FFT cross-correlation, summed over
trajectories and coordinates; matrices are assembled directly only at the
requested grid lags.  All accumulation is float64 with numpy's pairwise
summation, so the reduction tree is fixed and runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "LagGrid",
    "AutocovSeries",
    "estimate_autocov",
    "symmetrize",
    "rho_series",
    "lag_trace_profile",
    "per_trajectory_lag_traces",
]

_FFT_ROW_BLOCK = 256  # bounds transient rfft memory to ~ block * 2S complex128


@dataclass(frozen=True)
class LagGrid:
    """Strictly increasing integer lags (snapshot units) starting at 0."""

    lags: np.ndarray
    dt_snapshot: float

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        if lags.ndim != 1 or lags.size == 0 or lags[0] != 0:
            raise ValueError("lag grid must be 1-D and start at 0")
        if np.any(np.diff(lags) <= 0):
            raise ValueError("lag grid must be strictly increasing")
        if not self.dt_snapshot > 0:
            raise ValueError("dt_snapshot must be positive")
        object.__setattr__(self, "lags", lags)

    def __len__(self):
        return self.lags.size

    @property
    def physical(self):
        """Lag times in physical units."""
        return self.lags * self.dt_snapshot

    @property
    def widths(self):
        """Rectangle widths: spacing to the next grid point, last one repeated."""
        tau = self.physical
        if tau.size == 1:
            return np.array([self.dt_snapshot])
        d = np.diff(tau)
        return np.append(d, d[-1])

    @classmethod
    def uniform(cls, n_snapshots, dt_snapshot, max_lag=None):
        """Every stored lag 0..max_lag (default: all S-1 available)."""
        top = n_snapshots - 1 if max_lag is None else min(max_lag, n_snapshots - 1)
        return cls(np.arange(top + 1), dt_snapshot)

    @classmethod
    def with_log_tail(cls, n_snapshots, dt_snapshot, linear_cap=64, n_log=48):
        """Linear grid up to a cap plus a log-spaced tail to the longest lag."""
        top = n_snapshots - 1
        lin = np.arange(min(linear_cap, top) + 1)
        if top > linear_cap:
            tail = np.unique(np.round(np.geomspace(linear_cap + 1, top, n_log)).astype(np.int64))
            lin = np.concatenate([lin, tail])
        return cls(np.unique(lin), dt_snapshot)


@dataclass(frozen=True)
class AutocovSeries:
    """Per-lag autocovariance summaries over a grid.

    ``C`` holds the d x d matrices at each grid lag when retained (None
    otherwise); ``rho`` always holds the trace-normalized autocorrelation.
    ``c0`` is the lag-0 matrix, kept unconditionally for threshold plug-ins.
    """

    grid: LagGrid
    C: Optional[list]
    rho: np.ndarray
    center: np.ndarray
    n_traj: int
    c0: np.ndarray

    def truncated(self, max_physical_lag):
        """Series restricted to grid lags with physical time <= max_physical_lag."""
        keep = self.grid.physical <= max_physical_lag
        grid = LagGrid(self.grid.lags[keep], self.grid.dt_snapshot)
        c_list = [m for m, k in zip(self.C, keep) if k] if self.C is not None else None
        return AutocovSeries(grid=grid, C=c_list, rho=self.rho[keep],
                             center=self.center, n_traj=self.n_traj, c0=self.c0)


def symmetrize(c):
    """(C + C^T)/2; idempotent."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("matrix must be square")
    return 0.5 * (c + c.T)


def estimate_autocov(ens, lag, center):
    """Trajectory-averaged lag-tau cross product, tau in snapshot units."""
    s = ens.n_snapshots
    if not 0 <= lag < s:
        raise ValueError(f"lag {lag} out of range for {s} snapshots")
    centered = ens.data - np.asarray(center, dtype=np.float64)
    a = centered[:, : s - lag, :]
    b = centered[:, lag:, :]
    return np.tensordot(a, b, axes=([0, 1], [0, 1])) / (ens.n_traj * (s - lag))


def per_trajectory_lag_traces(ens, center):
    """Raw per-trajectory lag sums r_n(tau) = sum_t <Y_t, Y_{t+tau}>, shape (N, S).

    FFT cross-correlation per trajectory (summed over coordinates).  Dividing
    column tau by (S - tau) and averaging over n gives tr C_hat(tau); keeping
    the per-trajectory rows makes trajectory bootstraps a reweighting.
    """
    n, s, d = ens.data.shape
    nfft = 1 << int(np.ceil(np.log2(2 * s)))
    out = np.empty((n, s))
    centered = ens.data - np.asarray(center, dtype=np.float64)
    block = max(1, _FFT_ROW_BLOCK // max(d, 1))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        f = np.fft.rfft(centered[lo:hi], n=nfft, axis=1)
        power = np.sum(f.real**2 + f.imag**2, axis=2)  # sum over coordinates
        out[lo:hi] = np.fft.irfft(power, n=nfft, axis=1)[:, :s]
    return out


def lag_trace_profile(ens, center):
    """tr C_hat(tau) for every stored lag 0..S-1 at once."""
    s = ens.n_snapshots
    sums = per_trajectory_lag_traces(ens, center).sum(axis=0)
    return sums / (ens.n_traj * (s - np.arange(s)))


def rho_series(ens, grid, center=None, retain_matrices=True):
    """Autocovariance series over a lag grid with trace-normalized rho.

    rho comes from the full FFT trace profile (so rho[0] == 1 exactly);
    matrices are assembled per grid lag only when ``retain_matrices``.
    """
    if center is None:
        center = ens.mean_used
    center = np.asarray(center, dtype=np.float64)
    if grid.lags[-1] >= ens.n_snapshots:
        raise ValueError("max grid lag exceeds stored snapshot count")
    traces = lag_trace_profile(ens, center)
    if not traces[0] > 0:
        raise ValueError("tr C_hat(0) <= 0: degenerate ensemble")
    rho = traces[grid.lags] / traces[0]
    c0 = estimate_autocov(ens, 0, center)
    mats = None
    if retain_matrices:
        mats = [c0 if lag == 0 else estimate_autocov(ens, int(lag), center) for lag in grid.lags]
    return AutocovSeries(grid=grid, C=mats, rho=rho, center=center,
                         n_traj=ens.n_traj, c0=c0)
