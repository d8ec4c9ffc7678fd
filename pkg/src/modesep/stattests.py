"""Unimodality tests, trajectory bootstrap, and the matched-pipeline MC null.

The dip statistic follows the classical alternating greatest-convex-minorant /
least-concave-majorant algorithm on the sorted sample (Hartigan & Hartigan's
test as refined in Maechler's reference implementation), jitted with numba so
Monte-Carlo calibration against uniform samples of the same size is cheap.
Empirical p-values use the add-one convention (1 + #{null >= obs}) / (1 + B):
no replicate count can produce p = 0, and ties count against rejection.

Silverman's test finds the critical bandwidth (smallest Gaussian-KDE
bandwidth with a unimodal smoothed density on a fixed 512-point grid spanning
the sample range +- 3h) by bisection, then bootstraps: resample + jitter at
h_crit, rescale to preserve the sample variance, and count how often the
smoothed density is multimodal at h_crit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

__all__ = [
    "TestResult",
    "BootstrapResult",
    "McNullResult",
    "dip_statistic",
    "dip_pvalue",
    "silverman_test",
    "critical_bandwidth",
    "count_kde_modes",
    "trajectory_bootstrap",
    "matched_mc_null",
    "empirical_pvalue",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_boot: int
    method: str

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")
        if self.n_boot < 1:
            raise ValueError("n_boot must be >= 1")


def empirical_pvalue(observed, null_values):
    """(1 + #{null >= observed}) / (1 + B); ties count against rejection."""
    null_values = np.asarray(null_values)
    return float((1 + np.sum(null_values >= observed)) / (1 + null_values.size))


@njit(cache=True)
def _dip_sorted(x):  # pragma: no cover - exercised through dip_statistic
    n = x.shape[0]
    if x[0] == x[n - 1]:
        return 0.0

    # Convex-minorant predecessor chain mn and concave-majorant successor
    # chain mj over the full sample (slope comparisons cross-multiplied).
    mn = np.empty(n, dtype=np.int64)
    mn[0] = 0
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj
    mj = np.empty(n, dtype=np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    gcm = np.empty(n, dtype=np.int64)
    lcm = np.empty(n, dtype=np.int64)
    low = 0
    high = n - 1
    dip = 0.0
    while True:
        i = 0
        gcm[0] = high
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = i
        l_gcm = i
        ix = ig - 1
        i = 0
        lcm[0] = low
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = i
        l_lcm = i
        iv = 1

        # Alternating walk: the largest vertical gap between the two fits.
        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmil = gcm[ix + 1]
                    dx = (lcmiv - gcmil + 1) \
                        - (x[lcmiv] - x[gcmil]) * (gcmix - gcmil) / (x[gcmix] - x[gcmil])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmivl = lcm[iv - 1]
                    dx = (x[gcmix] - x[lcmivl]) * (lcmiv - lcmivl) / (x[lcmiv] - x[lcmivl]) \
                        - (gcmix - lcmivl - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        if d < dip:
            break

        # Largest distance of the empirical CDF from each fit inside the
        # current modal interval.
        dip_l = 0.0
        for j in range(ig, l_gcm):
            max_t = 1.0
            jb = gcm[j + 1]
            je = gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                cc = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * cc
                    if max_t < t:
                        max_t = t
            if dip_l < max_t:
                dip_l = max_t
        dip_u = 0.0
        for j in range(ih, l_lcm):
            max_t = 1.0
            jb = lcm[j]
            je = lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                cc = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * cc - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
            if dip_u < max_t:
                dip_u = max_t

        dip_new = dip_u if dip_u > dip_l else dip_l
        if dip < dip_new:
            dip = dip_new
        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]
    return dip / (2.0 * n)


def dip_statistic(sample):
    """Hartigan dip: half the max CDF distance to the nearest unimodal CDF."""
    x = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    if x.size < 4:
        raise ValueError("dip needs at least 4 points")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample values")
    return float(_dip_sorted(x))


def dip_pvalue(sample, n_boot=2000, seed=0):
    """Monte-Carlo dip p-value calibrated against uniform samples of equal size."""
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    x = np.asarray(sample, dtype=np.float64).ravel()
    observed = dip_statistic(x)
    rng = np.random.default_rng(seed)
    null = np.empty(n_boot)
    for b in range(n_boot):
        null[b] = _dip_sorted(np.sort(rng.random(x.size)))
    return TestResult(statistic=observed, p_value=empirical_pvalue(observed, null),
                      n_boot=n_boot, method="dip")


def count_kde_modes(sample, bandwidth, grid_size=512):
    """Local maxima of the Gaussian-kernel smoothed density on a fixed grid."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    grid = np.linspace(x.min() - 3.0 * bandwidth, x.max() + 3.0 * bandwidth, grid_size)
    dens = np.zeros(grid_size)
    for lo in range(0, x.size, 4096):
        chunk = x[lo: lo + 4096]
        dens += np.exp(-0.5 * ((grid[:, None] - chunk[None, :]) / bandwidth) ** 2).sum(axis=1)
    interior = (dens[1:-1] > dens[:-2]) & (dens[1:-1] > dens[2:])
    return int(np.sum(interior))


def critical_bandwidth(sample, grid_size=512, rel_tol=1e-4):
    """Smallest bandwidth at which the smoothed density is unimodal (bisection)."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    span = float(x.max() - x.min())
    if span == 0.0:
        raise ValueError("degenerate sample: zero variance")
    hi = span
    while count_kde_modes(x, hi, grid_size) > 1:
        hi *= 2.0
    lo = span / grid_size
    while count_kde_modes(x, lo, grid_size) <= 1:
        lo *= 0.5
        if lo < 1e-9 * span:  # sample is unimodal at grid resolution already
            return lo
    while (hi - lo) / hi > rel_tol:
        mid = 0.5 * (lo + hi)
        if count_kde_modes(x, mid, grid_size) <= 1:
            hi = mid
        else:
            lo = mid
    return hi


def silverman_test(sample, n_boot=500, seed=0, grid_size=512):
    """Bandwidth test of unimodality via the smoothed bootstrap at h_crit."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < 10:
        raise ValueError("silverman test needs at least 10 points")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    h_crit = critical_bandwidth(x, grid_size)
    var = float(np.var(x))
    if var == 0.0:
        raise ValueError("degenerate sample: zero variance")
    shrink = 1.0 / np.sqrt(1.0 + h_crit**2 / var)
    rng = np.random.default_rng(seed)
    multimodal = 0
    for _ in range(n_boot):
        y = x[rng.integers(0, x.size, size=x.size)]
        y = y + h_crit * rng.standard_normal(x.size)
        y_bar = y.mean()
        y = y_bar + (y - y_bar) * shrink  # keep the resample at the sample variance
        if count_kde_modes(y, h_crit, grid_size) > 1:
            multimodal += 1
    p = (1 + multimodal) / (1 + n_boot)
    return TestResult(statistic=float(h_crit), p_value=p, n_boot=n_boot, method="silverman")


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    quantiles: dict
    n_boot: int
    replicates: np.ndarray
    degenerate: bool  # n_boot too small for a spread estimate


def trajectory_bootstrap(ens, statistic, n_boot=1000, seed=0, quantiles=(0.025, 0.975)):
    """Resample whole trajectories with replacement and recompute a statistic.

    Resampling never happens within a trajectory: temporal dependence along
    each path is preserved, only the ensemble membership is randomized.
    """
    if ens.n_traj < 2:
        raise ValueError("bootstrap needs at least 2 trajectories")
    rng = np.random.default_rng(seed)
    reps = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, ens.n_traj, size=ens.n_traj)
        reps[b] = statistic(ens.subset(idx))
    degenerate = n_boot < 2
    se = 0.0 if degenerate else float(np.std(reps, ddof=1))
    qs = {float(q): float(np.quantile(reps, q)) for q in quantiles}
    return BootstrapResult(se=se, quantiles=qs, n_boot=n_boot, replicates=reps,
                           degenerate=degenerate)


@dataclass(frozen=True)
class McNullResult:
    """Per-rank null eigenvalue distributions from the matched pipeline."""

    eigenvalues: np.ndarray  # (n_reps, d), descending within each replicate
    alpha: float

    def quantile(self, rank, level=None):
        level = 1.0 - self.alpha if level is None else level
        return float(np.quantile(self.eigenvalues[:, rank], level))

    def pvalue(self, observed, rank):
        return empirical_pvalue(observed, self.eigenvalues[:, rank])

    def pvalue_string(self, observed, rank):
        """Human-readable p with the finite-replicate resolution ceiling."""
        p = self.pvalue(observed, rank)
        floor = 1.0 / (1 + self.eigenvalues.shape[0])
        return f"< {floor:.3g}" if p <= floor else f"{p:.4g}"


def matched_mc_null(data, tau_star, pipeline, n_reps=100, seed=0, alpha=0.05):
    """Matched-pipeline Monte-Carlo noise floor.

    Estimates the covariance of ``data``, then per replicate draws the same
    number of N(0, Sigma_hat) samples and calls
    ``pipeline(samples, tau_star, replicate_seed)`` which must run the same
    score fit (if any), simulation, autocovariance, and eigendecomposition as
    the analysis under test, returning an eigenvalue array.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be (n, d)")
    n, d = data.shape
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / n
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    rng = np.random.default_rng(seed)
    out = None
    for b in range(n_reps):
        rep_seed = int(rng.integers(0, 2**63 - 1))
        samples = np.random.default_rng(rep_seed).standard_normal((n, d)) @ root.T
        eigs = np.sort(np.asarray(pipeline(samples, tau_star, rep_seed)))[::-1]
        if out is None:
            out = np.empty((n_reps, eigs.size))
        out[b] = eigs
    return McNullResult(eigenvalues=out, alpha=alpha)
