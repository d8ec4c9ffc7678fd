"""Metastability-ordered directions from the symmetrized lag autocovariance.

Eigendecomposing C_sym(tau) at a well-chosen lag ranks directions by how much
slowly-decaying variance they carry, unlike PCA's ranking by raw variance
(the two coincide exactly at tau = 0).  Spike counting against the analytic
null edge lambda_plus(tau) gives the recovered direction count, and the full
lag-selection rule certifies each direction three ways:

(i)   its eigenvalue rejects the noise-only null, by analytic-floor
      exceedance or by a matched Monte-Carlo null at Bonferroni level
      alpha/m over the m candidate directions;
(ii)  the 1-D data projection onto it rejects unimodality (dip and/or
      Silverman test at level alpha_proj/family, family defaulting to m);
(iii) rho(tau) < 1/e, so the lag is at least one relaxation time out and
      the estimate is not a relabelled PCA.

tau*(m) is the largest grid lag passing all three for the top m directions;
the recovered count m_hat is the largest m for which tau*(m) exists, searched
downward from the plateau count of the analytic-floor exceedance curve.

For trajectory-averaged estimators the floor's aspect ratio uses gamma = d/N
with N the trajectory count: the analytic law is exact for independent
pairs, so the floor is a conservative reference and the matched Monte-Carlo
null is the calibrated alternative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .autocov import AutocovSeries, symmetrize
from .nullspec import NullParams, bulk_sigma_sq, support_edges
from . import stattests

__all__ = [
    "DaReport",
    "DirectionVerdict",
    "ProjectionTestConfig",
    "AnalyticFloor",
    "McFloor",
    "da_at_lag",
    "count_above_floor",
    "auto_select",
    "select_lag_full",
    "subspace_alignment",
]

_INV_E = float(np.exp(-1.0))


def da_at_lag(c_sym):
    """Full symmetric eigendecomposition, eigenvalues descending.

    Sign convention: the first coordinate of each direction exceeding 1e-12
    in magnitude is made positive, so reports are reproducible.
    """
    c_sym = np.asarray(c_sym, dtype=np.float64)
    if c_sym.ndim != 2 or c_sym.shape[0] != c_sym.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(c_sym - c_sym.T)) > 1e-8 * max(1.0, np.max(np.abs(c_sym))):
        raise ValueError("matrix is not symmetric within 1e-8; symmetrize first")
    vals, vecs = np.linalg.eigh(symmetrize(c_sym))
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def count_above_floor(eigenvalues, lambda_plus):
    """Number of eigenvalues strictly above the null edge."""
    return int(np.sum(np.asarray(eigenvalues) > lambda_plus))


def auto_select(lags_physical, counts):
    """Plateau rule: m_hat is the max count, tau_star the last lag achieving it."""
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("empty count curve")
    m_hat = int(counts.max())
    if m_hat == 0:
        return 0, float(np.asarray(lags_physical)[0])
    tau_star = float(np.asarray(lags_physical)[np.flatnonzero(counts == m_hat)[-1]])
    return m_hat, tau_star


def subspace_alignment(v, q_ref):
    """Squared Frobenius overlap |V^T Q|_F^2 / k between two orthonormal frames."""
    v = np.asarray(v)
    q_ref = np.asarray(q_ref)
    if v.shape != q_ref.shape:
        raise ValueError("column counts must match")
    k = q_ref.shape[1]
    return float(np.linalg.norm(v.T @ q_ref, "fro") ** 2 / k)


@dataclass(frozen=True)
class AnalyticFloor:
    """lambda_plus(tau) from the free-convolution null.

    sigma_sq=None estimates the variance scale from the lag-0 spectrum with
    optional spike peeling; gamma is d over the trajectory count.
    """

    gamma: float
    sigma_sq: Optional[float] = None
    peel: int = 0

    def resolve_sigma(self, series: AutocovSeries):
        if self.sigma_sq is not None:
            return self.sigma_sq
        return bulk_sigma_sq(np.linalg.eigvalsh(series.c0), peel=self.peel)

    def lambda_plus(self, tau, sigma_sq):
        return support_edges(NullParams(sigma_sq, self.gamma, float(tau))).lambda_plus


@dataclass(frozen=True)
class McFloor:
    """Matched Monte-Carlo null: per-rank eigenvalue samples at specific lags.

    ``samples_by_lag`` maps a grid lag (snapshot units) to a (B, d) array of
    descending per-replicate eigenvalues from the matched pipeline.
    """

    samples_by_lag: dict

    def pvalue(self, lag, rank, observed):
        samples = self.samples_by_lag[int(lag)]
        return stattests.empirical_pvalue(observed, samples[:, rank])


@dataclass(frozen=True)
class ProjectionTestConfig:
    """Unimodality certification of 1-D projections (criterion ii)."""

    alpha: float = 0.05
    methods: tuple = ("dip", "silverman")
    family_size: Optional[int] = None  # None: the candidate-direction count m
    n_boot_dip: int = 2000
    n_boot_silverman: int = 300
    seed: int = 0


@dataclass(frozen=True)
class DirectionVerdict:
    rank: int
    eigenvalue: float
    floor_value: float
    floor_pass: bool
    floor_gate: str
    dip_p: Optional[float]
    silverman_p: Optional[float]
    projection_pass: bool

    def to_dict(self):
        return {"rank": self.rank, "eigenvalue": self.eigenvalue,
                "floor_value": self.floor_value, "floor_pass": self.floor_pass,
                "floor_gate": self.floor_gate, "dip_p": self.dip_p,
                "silverman_p": self.silverman_p, "projection_pass": self.projection_pass}


@dataclass(frozen=True)
class DaReport:
    tau_star: float
    m_hat: int
    eigenvalues: np.ndarray
    directions: np.ndarray
    floor: np.ndarray
    count_curve: np.ndarray
    lags_physical: np.ndarray
    test_verdicts: list = field(default_factory=list)
    rho_at_tau_star: float = float("nan")
    sigma_sq_used: float = float("nan")
    gamma: float = float("nan")
    note: str = ""

    def to_dict(self):
        return {"tau_star": self.tau_star, "m_hat": self.m_hat,
                "eigenvalues": self.eigenvalues.tolist(),
                "directions": self.directions.tolist(),
                "floor": self.floor.tolist(),
                "count_curve": self.count_curve.tolist(),
                "lags": self.lags_physical.tolist(),
                "test_verdicts": [v.to_dict() for v in self.test_verdicts],
                "rho_at_tau_star": self.rho_at_tau_star,
                "sigma_sq_used": self.sigma_sq_used, "gamma": self.gamma,
                "note": self.note}


def spike_report(series: AutocovSeries, floor: AnalyticFloor):
    """Eigen-curves, analytic floor, and plateau auto-rule over the whole grid."""
    if series.C is None:
        raise ValueError("series must retain matrices")
    sigma_sq = floor.resolve_sigma(series)
    taus = series.grid.physical
    eigs = [da_at_lag(symmetrize(c)) for c in series.C]
    floors = np.array([floor.lambda_plus(t, sigma_sq) for t in taus])
    counts = np.array([count_above_floor(vals, f) for (vals, _), f in zip(eigs, floors)])
    m_auto, tau_auto = auto_select(taus, counts)
    return eigs, floors, counts, m_auto, tau_auto, sigma_sq


def _projection_tests(samples, direction, cfg: ProjectionTestConfig, threshold):
    proj = samples @ direction
    dip_p = silverman_p = None
    if "dip" in cfg.methods:
        dip_p = stattests.dip_pvalue(proj, n_boot=cfg.n_boot_dip, seed=cfg.seed).p_value
    if "silverman" in cfg.methods:
        silverman_p = stattests.silverman_test(proj, n_boot=cfg.n_boot_silverman,
                                               seed=cfg.seed).p_value
    rejected = [p for p in (dip_p, silverman_p) if p is not None and p < threshold]
    return dip_p, silverman_p, bool(rejected)


def select_lag_full(series: AutocovSeries, samples, floor, tests=ProjectionTestConfig(),
                    m_start=None, alpha=0.05, mc_floor: Optional[McFloor] = None):
    """Joint lag selection and direction-count recovery.

    ``samples`` is the raw (n, d) sample matrix used for projection tests;
    the analytic ``floor`` always drives the plateau count curve, while
    ``mc_floor`` (when given) replaces criterion (i) with per-rank empirical
    p-values at Bonferroni level alpha/m.
    """
    if samples is None and tests.methods:
        raise ValueError("projection tests require the raw sample matrix")
    eigs, floors, counts, m_auto, _, sigma_sq = spike_report(series, floor)
    taus = series.grid.physical
    d = series.c0.shape[0]
    rho = series.rho

    lag_order = np.argsort(taus)[::-1]  # search largest lag first
    guard_ok = rho < _INV_E

    def floor_pass(li, m):
        vals = eigs[li][0]
        if mc_floor is not None and int(series.grid.lags[li]) in mc_floor.samples_by_lag:
            ps = [mc_floor.pvalue(series.grid.lags[li], r, vals[r]) for r in range(m)]
            return all(p <= alpha / m for p in ps), "mc"
        return all(vals[r] > floors[li] for r in range(m)), "analytic"

    start = min(m_start if m_start is not None else max(m_auto, 1), d)
    chosen = None
    for m in range(start, 0, -1):
        for li in lag_order:
            if taus[li] == 0.0 or not guard_ok[li]:
                continue
            ok_floor, gate = floor_pass(li, m)
            if not ok_floor:
                continue
            vecs = eigs[li][1]
            fam = tests.family_size if tests.family_size is not None else m
            threshold = tests.alpha / max(fam, 1)
            verdicts = []
            all_ok = True
            for r in range(m):
                dip_p, sil_p, proj_ok = _projection_tests(samples, vecs[:, r], tests, threshold) \
                    if tests.methods else (None, None, True)
                verdicts.append(DirectionVerdict(
                    rank=r, eigenvalue=float(eigs[li][0][r]), floor_value=float(floors[li]),
                    floor_pass=True, floor_gate=gate, dip_p=dip_p, silverman_p=sil_p,
                    projection_pass=proj_ok))
                if not proj_ok:
                    all_ok = False
                    break
            if all_ok:
                chosen = (m, li, verdicts)
                break
        if chosen:
            break

    if chosen is None:
        vals, vecs = eigs[0]
        return DaReport(tau_star=float(taus[0]), m_hat=0, eigenvalues=vals, directions=vecs,
                        floor=floors, count_curve=counts, lags_physical=taus,
                        test_verdicts=[], rho_at_tau_star=float(rho[0]),
                        sigma_sq_used=sigma_sq, gamma=floor.gamma,
                        note="no direction passed the joint criterion")
    m, li, verdicts = chosen
    vals, vecs = eigs[li]
    return DaReport(tau_star=float(taus[li]), m_hat=m, eigenvalues=vals, directions=vecs,
                    floor=floors, count_curve=counts, lags_physical=taus,
                    test_verdicts=verdicts, rho_at_tau_star=float(rho[li]),
                    sigma_sq_used=sigma_sq, gamma=floor.gamma)
