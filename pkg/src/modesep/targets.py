"""Target densities: specs, exact samplers, analytic moments, and score oracles.

Every target exposes the same small surface:

- ``dim``: ambient dimension
- ``score(x)``: gradient of the log-density, accepting ``(d,)`` or ``(n, d)``
- ``log_density(x)``: log-density up to an additive constant (used by
  finite-difference checks and mutual-information posteriors)
- ``sample(n, seed)``: exact i.i.d. stationary draws
- ``moments()``: ``(mean, cov, sigma_f_sq)`` with ``sigma_f_sq = tr(cov)/d``

Responsibilities and kernel weights are computed in log space with
log-sum-exp: deep-barrier regions underflow naive exponentials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "GmmSpec",
    "PlantedWellSpec",
    "KdeModel",
    "IsoGaussian",
    "random_orthogonal",
    "scott_bandwidth",
    "spec_to_json",
    "spec_from_json",
]

_LOG2PI = float(np.log(2.0 * np.pi))


def _as_points(x, dim):
    """Validate input and return ``(points, was_vector)`` with points (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input point")
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"dimension mismatch: got {x.shape[0]}, expected {dim}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"dimension mismatch: got shape {x.shape}, expected (*, {dim})")
    return x, False


def random_orthogonal(d, seed):
    """Orthonormalization of a seeded Gaussian matrix (QR with sign fix).

    Deterministic given the seed; close enough to uniform for planted
    rotations (exact Haar measure is not required anywhere downstream).
    """
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class GmmSpec:
    """Gaussian mixture with weights ``pi``, means ``mu_i``, covariances ``Sigma_i``.

    Positive definiteness is a construction-time error: Cholesky factors and
    precisions are cached on the frozen instance, so evaluation never fails.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _prec: np.ndarray = field(init=False, repr=False, compare=False)
    _log_norm: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise ValueError("inconsistent component shapes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        if np.max(np.abs(cov - np.swapaxes(cov, 1, 2))) > 1e-12:
            raise ValueError("covariances must be symmetric within 1e-12")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariances must be positive definite") from exc
        prec = np.stack([np.linalg.inv(c) for c in cov])
        logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
        with np.errstate(divide="ignore"):
            log_norm = np.log(w) - 0.5 * (logdet + d * _LOG2PI)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_prec", prec)
        object.__setattr__(self, "_log_norm", log_norm)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.weights.shape[0]

    def _log_joint(self, pts):
        """log(pi_i N_i(x)) for each point and component, shape (n, k)."""
        diff = pts[:, None, :] - self.means[None, :, :]  # (n, k, d)
        maha = np.einsum("nkd,kde,nke->nk", diff, self._prec, diff)
        return self._log_norm[None, :] - 0.5 * maha

    def log_density(self, x):
        pts, was_vec = _as_points(x, self.dim)
        out = logsumexp(self._log_joint(pts), axis=1)
        return float(out[0]) if was_vec else out

    def responsibilities(self, x):
        """Posterior component probabilities at x, shape (n, k) (or (k,))."""
        pts, was_vec = _as_points(x, self.dim)
        lj = self._log_joint(pts)
        r = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        return r[0] if was_vec else r

    def score(self, x):
        pts, was_vec = _as_points(x, self.dim)
        lj = self._log_joint(pts)
        r = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
        pull = np.einsum("kde,nke->nkd", self._prec, self.means[None, :, :] - pts[:, None, :])
        grad = np.einsum("nk,nkd->nd", r, pull)
        return grad[0] if was_vec else grad

    def moments(self):
        mean = self.weights @ self.means
        centered = self.means - mean
        cov = np.einsum("k,kde->de", self.weights, self.covariances)
        cov = cov + np.einsum("k,kd,ke->de", self.weights, centered, centered)
        return mean, cov, float(np.trace(cov) / self.dim)

    def sample(self, n, seed):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        out = self.means[labels] + np.einsum("nde,ne->nd", self._chol[labels], z)
        return out

    def transformed(self, scale, rotation, shift):
        """Spec of y = scale * rotation @ x + shift (similarity image)."""
        q = np.asarray(rotation, dtype=np.float64)
        mu = scale * self.means @ q.T + np.asarray(shift, dtype=np.float64)
        cov = scale**2 * np.einsum("ab,kbc,dc->kad", q, self.covariances, q)
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
        return GmmSpec(self.weights, mu, cov)


def _double_well_score(y, c, s_sq):
    """Score of the 1D equal-weight mixture 0.5 N(+c, s^2) + 0.5 N(-c, s^2)."""
    return (c * np.tanh(c * y / s_sq) - y) / s_sq


def _double_well_logpdf(y, c, s_sq):
    # log[cosh] written via logaddexp for overflow safety at |y| >> c
    a = c * y / s_sq
    return -0.5 * (y * y + c * c) / s_sq + np.logaddexp(a, -a)


@dataclass(frozen=True)
class PlantedWellSpec:
    """Synthetic target with k known metastable axes in a rotated frame.

    In coordinates y = Q^T x, each of the first k axes carries a symmetric
    double well (equal mixture of N(+c, sigma_s^2) and N(-c, sigma_s^2)); the
    remaining d-k axes are Gaussian with variance ``sigma_iso_sq``, chosen as
    c^2 + mean(sigma_s^2) so that (for scalar sigma_s) every coordinate has
    the same stationary variance and the covariance carries no PCA signal.
    The ground-truth slow basis is ``Q[:, :k]``.
    """

    d: int
    k: int
    c: float
    sigma_s: np.ndarray
    Q: np.ndarray
    sigma_iso_sq: float = field(init=False)

    def __post_init__(self):
        if not 0 <= self.k <= self.d:
            raise ValueError("need 0 <= k <= d")
        s = np.asarray(self.sigma_s, dtype=np.float64)
        s = np.full(self.k, float(s)) if s.ndim == 0 else s.astype(np.float64)
        if self.k and s.shape != (self.k,):
            raise ValueError("sigma_s must be scalar or length-k")
        if self.k and np.any(s <= 0):
            raise ValueError("sigma_s must be positive")
        q = np.asarray(self.Q, dtype=np.float64)
        if q.shape != (self.d, self.d) or np.max(np.abs(q.T @ q - np.eye(self.d))) > 1e-10:
            raise ValueError("Q must be orthogonal within 1e-10")
        mean_s_sq = float(np.mean(s**2)) if self.k else float(np.mean(np.atleast_1d(self.sigma_s)) ** 2)
        object.__setattr__(self, "sigma_s", s)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "sigma_iso_sq", self.c**2 + mean_s_sq)

    @classmethod
    def create(cls, d, k, c, sigma_s, seed):
        return cls(d=d, k=k, c=float(c), sigma_s=np.asarray(sigma_s, dtype=np.float64),
                   Q=random_orthogonal(d, seed))

    @property
    def dim(self):
        return self.d

    @property
    def slow_basis(self):
        return self.Q[:, : self.k]

    def score(self, x):
        pts, was_vec = _as_points(x, self.d)
        y = pts @ self.Q  # rows of y are Q^T x
        grad_y = -y / self.sigma_iso_sq
        if self.k:
            s_sq = self.sigma_s**2
            grad_y[:, : self.k] = _double_well_score(y[:, : self.k], self.c, s_sq)
        grad = grad_y @ self.Q.T
        return grad[0] if was_vec else grad

    def log_density(self, x):
        pts, was_vec = _as_points(x, self.d)
        y = pts @ self.Q
        out = -0.5 * np.sum(y[:, self.k:] ** 2, axis=1) / self.sigma_iso_sq
        if self.k:
            out = out + np.sum(_double_well_logpdf(y[:, : self.k], self.c, self.sigma_s**2), axis=1)
        return float(out[0]) if was_vec else out

    def moments(self):
        var = np.full(self.d, self.sigma_iso_sq)
        if self.k:
            var[: self.k] = self.c**2 + self.sigma_s**2
        cov = (self.Q * var[None, :]) @ self.Q.T
        return np.zeros(self.d), cov, float(np.mean(var))

    def sample(self, n, seed):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        y = rng.standard_normal((n, self.d)) * np.sqrt(self.sigma_iso_sq)
        if self.k:
            signs = rng.choice([-1.0, 1.0], size=(n, self.k))
            y[:, : self.k] = self.c * signs + rng.standard_normal((n, self.k)) * self.sigma_s
        return y @ self.Q.T


def scott_bandwidth(samples):
    """Scott's rule for an isotropic Gaussian kernel: n^(-1/(d+4)) * mean marginal std."""
    samples = np.asarray(samples, dtype=np.float64)
    n, d = samples.shape
    sigma = float(np.sqrt(np.mean(np.var(samples, axis=0))))
    return sigma * n ** (-1.0 / (d + 4))


@dataclass(frozen=True)
class KdeModel:
    """Isotropic Gaussian kernel density estimate: score oracle for sample-only targets."""

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        if c.shape[0] < 1:
            raise ValueError("need at least one center")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "centers", c)

    @classmethod
    def from_samples(cls, samples, bandwidth=None, n_centers=2000, seed=0):
        """Build from a sample matrix, subsampling centers; default bandwidth Scott/2."""
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        if bandwidth is None:
            bandwidth = 0.5 * scott_bandwidth(samples)
        if samples.shape[0] > n_centers:
            idx = np.random.default_rng(seed).choice(samples.shape[0], size=n_centers, replace=False)
            samples = samples[idx]
        return cls(centers=samples, bandwidth=float(bandwidth))

    @property
    def dim(self):
        return self.centers.shape[1]

    def _log_weights(self, pts):
        diff = pts[:, None, :] - self.centers[None, :, :]
        return -0.5 * np.sum(diff**2, axis=2) / self.bandwidth**2

    def log_density(self, x):
        pts, was_vec = _as_points(x, self.dim)
        d = self.dim
        out = (logsumexp(self._log_weights(pts), axis=1)
               - np.log(self.centers.shape[0]) - d * np.log(self.bandwidth) - 0.5 * d * _LOG2PI)
        return float(out[0]) if was_vec else out

    def score(self, x):
        pts, was_vec = _as_points(x, self.dim)
        lw = self._log_weights(pts)
        w = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
        grad = (w @ self.centers - pts) / self.bandwidth**2
        return grad[0] if was_vec else grad

    def moments(self):
        mean = self.centers.mean(axis=0)
        centered = self.centers - mean
        cov = centered.T @ centered / self.centers.shape[0] + self.bandwidth**2 * np.eye(self.dim)
        return mean, cov, float(np.trace(cov) / self.dim)

    def sample(self, n, seed):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, self.centers.shape[0], size=n)
        return self.centers[idx] + self.bandwidth * rng.standard_normal((n, self.dim))


@dataclass(frozen=True)
class IsoGaussian:
    """Isotropic Gaussian N(mean, sigma_sq I): the exactly solvable baseline target."""

    mean: np.ndarray
    sigma_sq: float

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        if not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "sigma_sq", float(self.sigma_sq))

    @property
    def dim(self):
        return self.mean.shape[0]

    def score(self, x):
        pts, was_vec = _as_points(x, self.dim)
        grad = (self.mean[None, :] - pts) / self.sigma_sq
        return grad[0] if was_vec else grad

    def log_density(self, x):
        pts, was_vec = _as_points(x, self.dim)
        out = -0.5 * np.sum((pts - self.mean) ** 2, axis=1) / self.sigma_sq
        return float(out[0]) if was_vec else out

    def moments(self):
        return self.mean.copy(), self.sigma_sq * np.eye(self.dim), self.sigma_sq

    def sample(self, n, seed):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        return self.mean + np.sqrt(self.sigma_sq) * rng.standard_normal((n, self.dim))


def spec_to_json(spec):
    """Serialize a GMM, planted-well, or iso-Gaussian spec to a JSON string."""
    if isinstance(spec, GmmSpec):
        doc = {"kind": "gmm", "weights": spec.weights.tolist(),
               "means": spec.means.tolist(), "covariances": spec.covariances.tolist()}
    elif isinstance(spec, PlantedWellSpec):
        doc = {"kind": "planted", "d": spec.d, "k": spec.k, "c": spec.c,
               "sigma_s": spec.sigma_s.tolist(), "Q": spec.Q.tolist()}
    elif isinstance(spec, IsoGaussian):
        doc = {"kind": "iso_gaussian", "mean": spec.mean.tolist(), "sigma_sq": spec.sigma_sq}
    else:
        raise TypeError(f"cannot serialize {type(spec).__name__}")
    return json.dumps(doc, sort_keys=True)


def spec_from_json(text):
    doc = json.loads(text)
    kind = doc.get("kind")
    if kind == "gmm":
        return GmmSpec(np.array(doc["weights"]), np.array(doc["means"]), np.array(doc["covariances"]))
    if kind == "planted":
        return PlantedWellSpec(d=doc["d"], k=doc["k"], c=doc["c"],
                               sigma_s=np.array(doc["sigma_s"]), Q=np.array(doc["Q"]))
    if kind == "iso_gaussian":
        return IsoGaussian(np.array(doc["mean"]), doc["sigma_sq"])
    raise ValueError(f"unknown spec kind: {kind!r}")
