"""Comparator methods: PCA, TICA, mixture mutual information, kNN entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln, psi

from .autocov import estimate_autocov, symmetrize
from .da import da_at_lag

__all__ = [
    "TicaConfig",
    "pca",
    "tica",
    "gmm_mutual_information",
    "knn_entropy",
]


def pca(data):
    """Eigenpairs of the sample covariance (1/n normalization), descending.

    The 1/n convention makes PCA on pooled snapshots coincide exactly with
    the lag-0 autocovariance eigendecomposition under the same centering.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("data must be (n >= 2, d)")
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / data.shape[0]
    return da_at_lag(cov)


@dataclass(frozen=True)
class TicaConfig:
    lag: int
    regularization_eps: float = None  # None: 1e-8 * tr C(0) / d

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        if self.regularization_eps is not None and self.regularization_eps < 0:
            raise ValueError("regularization_eps must be >= 0")


def tica(ens, config: TicaConfig, center=None):
    """Generalized eigenproblem C(tau) v = lambda C(0) v via symmetric whitening.

    Directions are mapped back to the original coordinates and normalized;
    eigenvalues are the per-direction lag-tau autocorrelations, so they are
    invariant under invertible linear reparameterizations of the data.
    """
    if center is None:
        center = ens.mean_used
    c0 = estimate_autocov(ens, 0, center)
    ct = symmetrize(estimate_autocov(ens, config.lag, center))
    d = c0.shape[0]
    eps = config.regularization_eps
    if eps is None:
        eps = 1e-8 * float(np.trace(c0)) / d
    c0_reg = c0 + eps * np.eye(d)
    vals0, vecs0 = np.linalg.eigh(c0_reg)
    if vals0[0] <= 0:
        raise ValueError("C(0) not positive definite after regularization")
    w = (vecs0 / np.sqrt(vals0)) @ vecs0.T  # symmetric inverse square root
    lam, u = da_at_lag(w @ ct @ w)
    directions = w @ u
    directions /= np.linalg.norm(directions, axis=0)
    return lam, directions


def gmm_mutual_information(spec, n_mc=50000, seed=0):
    """I(X; Z) between a mixture draw and its component label, in nats.

    H(Z) is exact; the conditional label entropy is a Monte-Carlo average of
    the posterior entropy over mixture draws.  Returns (mi, mc_se) with the
    estimate clamped into [0, H(Z)].
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    w = spec.weights
    h_z = float(-np.sum(w[w > 0] * np.log(w[w > 0])))
    x = spec.sample(n_mc, seed)
    post = spec.responsibilities(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(post > 0, post * np.log(post), 0.0)
    h_cond_draws = -plogp.sum(axis=1)
    h_cond = float(h_cond_draws.mean())
    se = float(h_cond_draws.std(ddof=1) / np.sqrt(n_mc))
    mi = min(max(h_z - h_cond, 0.0), h_z)
    return mi, se


def knn_entropy(samples, k=5, jitter_seed=0):
    """Kozachenko-Leonenko differential entropy in nats.

    H ~= psi(n) - psi(k) + log V_d + (d/n) sum log r_i with r_i the k-th
    neighbor distance and V_d the unit-ball volume.  Exact duplicates make
    r_i = 0; they get a deterministic seeded jitter of 1e-10 of the data
    scale (the log r_i singularity is not integrable).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("samples must be (n, d)")
    n, d = x.shape
    if not n > k >= 1:
        raise ValueError("need n > k >= 1")
    tree = cKDTree(x)
    r = tree.query(x, k=k + 1, workers=-1)[0][:, k]
    if np.any(r == 0):
        scale = float(np.std(x)) or 1.0
        x = x + 1e-10 * scale * np.random.default_rng(jitter_seed).standard_normal(x.shape)
        r = cKDTree(x).query(x, k=k + 1, workers=-1)[0][:, k]
    log_vd = 0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)
    return float(psi(n) - psi(k) + log_vd + d * np.mean(np.log(r)))
