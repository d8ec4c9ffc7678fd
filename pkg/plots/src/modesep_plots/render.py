"""The five figure kinds, each a pure function of already-computed CSVs."""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .reader import SchemaError, inputs_digest, read_table

__all__ = ["plot_null_overlay", "plot_sweeps", "plot_planted", "plot_ellipses",
           "plot_rho", "RENDERERS"]

_SSA_COLOR = "tab:blue"
_MI_COLOR = "tab:red"


def _save(fig, inputs, out_path):
    digest = inputs_digest(inputs)
    caption = f"source: {', '.join(os.path.basename(p) for p in inputs)}  [{digest}]"
    fig.text(0.01, 0.005, caption, fontsize=6, color="0.4")
    meta_key = "Description" if out_path.endswith(".svg") else "Source"
    fig.savefig(out_path, dpi=150, metadata={meta_key: caption})
    plt.close(fig)
    if not os.path.getsize(out_path):
        raise RuntimeError(f"empty figure written to {out_path}")
    return out_path


def plot_null_overlay(hist_csv, curve_csv, edges_csv, out_path, log_y=False):
    """Per-lag panels: eigenvalue histogram, analytic density, edge markers.

    The atom (when its mass is positive) renders as a stem at zero scaled to
    the panel, with its mass annotated.
    """
    hist = read_table(hist_csv, ["tau", "bin_lo", "bin_hi", "density"])
    curve = read_table(curve_csv, ["tau", "lambda", "density"])
    edges = read_table(edges_csv, ["tau", "lambda_minus", "lambda_plus", "lambda_inf",
                                   "atom_mass", "atom_frac", "max_eig"])
    taus = sorted(set(edges["tau"]))
    fig, axes = plt.subplots(1, len(taus), figsize=(3.4 * len(taus), 3.0), squeeze=False)
    for ax, tau in zip(axes[0], taus):
        sel = hist["tau"] == tau
        lo, hi, dens = hist["bin_lo"][sel], hist["bin_hi"][sel], hist["density"][sel]
        ax.bar(lo, dens, width=hi - lo, align="edge", color="lightsteelblue",
               edgecolor="none", label="empirical")
        csel = curve["tau"] == tau
        order = np.argsort(curve["lambda"][csel])
        lam = curve["lambda"][csel][order]
        rho = curve["density"][csel][order]
        gap = np.flatnonzero(np.diff(lam) > 10 * np.median(np.diff(lam)))
        lam, rho = np.insert(lam, gap + 1, np.nan), np.insert(rho, gap + 1, np.nan)
        ax.plot(lam, rho, color="crimson", lw=1.4, label="analytic")
        erow = {h: edges[h][edges["tau"] == tau][0] for h in edges.header}
        ax.axvline(erow["lambda_plus"], color="darkgreen", ls=":", lw=1.2)
        ax.axvline(erow["lambda_inf"], color="orange", ls=":", lw=1.2)
        if erow["atom_mass"] > 0:
            top = np.nanmax(dens) if dens.size else 1.0
            ax.plot([0, 0], [0, top * erow["atom_mass"]], color="crimson", lw=2.5)
            ax.annotate(f"atom {erow['atom_mass']:.2f}", (0, top * erow["atom_mass"]),
                        fontsize=7, ha="left", va="bottom", color="crimson")
        if log_y:
            ax.set_yscale("log")
        ax.set_title(f"lag = {tau:g}", fontsize=9)
        ax.set_xlabel("eigenvalue")
    axes[0][0].set_ylabel("density")
    axes[0][0].legend(fontsize=7)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    return _save(fig, [hist_csv, curve_csv, edges_csv], out_path)


def plot_sweeps(sweep_csv, out_path):
    """Scalar-score curve (left axis) against mutual information (right axis);
    points that did not reach the stopping criterion get a dagger marker."""
    table = read_table(sweep_csv, ["param", "ssa_mean", "ssa_sd", "dagger", "mi", "mi_se"])
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    x = table["param"]
    ax.errorbar(x, table["ssa_mean"], yerr=table["ssa_sd"], color=_SSA_COLOR,
                marker="o", ms=4, lw=1.4, label="SSA")
    for xi, yi, dag in zip(x, table["ssa_mean"], table["dagger"]):
        if dag:
            ax.annotate("†", (xi, yi), textcoords="offset points", xytext=(3, 5),
                        color=_SSA_COLOR, fontsize=11)
    ax.set_xlabel("sweep parameter")
    ax.set_ylabel("SSA", color=_SSA_COLOR)
    ax2 = ax.twinx()
    ax2.errorbar(x, table["mi"], yerr=table["mi_se"], color=_MI_COLOR, marker="s",
                 ms=3, lw=1.2, ls="--", label="MI")
    ax2.set_ylabel("mutual information (nats)", color=_MI_COLOR)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    return _save(fig, [sweep_csv], out_path)


def plot_planted(count_csv, out_path, alignment_csv=None):
    """Spike-count curve on a symlog lag axis, plus the recovery-vs-lag panel
    when the alignment CSV is supplied."""
    count = read_table(count_csv, ["tau", "count", "lambda_plus"])
    n_panels = 2 if alignment_csv else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(4.6 * n_panels, 3.2), squeeze=False)
    ax = axes[0][0]
    ax.plot(count["tau"], count["count"], marker="o", ms=4, color=_SSA_COLOR)
    ax.set_xscale("symlog", linthresh=max(1e-3, float(np.min(count["tau"][count["tau"] > 0],
                                                             initial=1.0))))
    ax.set_xlabel("lag")
    ax.set_ylabel("eigenvalues above the analytic edge")
    inputs = [count_csv]
    if alignment_csv:
        align = read_table(alignment_csv, ["tau", "da_alignment", "pca_alignment"])
        ax2 = axes[0][1]
        ax2.plot(align["tau"], align["da_alignment"], marker="o", ms=4,
                 color=_SSA_COLOR, label="lagged directions")
        ax2.plot(align["tau"], align["pca_alignment"], ls="--", color="0.4",
                 label="pca (lag-free)")
        ax2.set_xscale("symlog", linthresh=max(1e-3, float(np.min(align["tau"][align["tau"] > 0],
                                                                  initial=1.0))))
        ax2.set_xlabel("lag")
        ax2.set_ylabel("subspace alignment")
        ax2.set_ylim(0, 1.05)
        ax2.legend(fontsize=7)
        inputs.append(alignment_csv)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    return _save(fig, inputs, out_path)


def plot_ellipses(samples_csv, arrows_csv, out_path):
    """Two scatter panels; the second carries the leading-direction arrows."""
    samples = read_table(samples_csv, ["target", "x", "y"])
    arrows = read_table(arrows_csv, ["target", "vector", "x", "y"],
                        text_columns=("vector",))
    fig, axes = plt.subplots(1, 2, figsize=(8.2, 3.6))
    labels = {0: "isotropic", 1: "two ellipses"}
    for tid, ax in zip((0, 1), axes):
        sel = samples["target"] == tid
        if not np.any(sel):
            raise SchemaError(f"{samples_csv}: no rows for target {tid}")
        ax.scatter(samples["x"][sel], samples["y"][sel], s=3, alpha=0.3,
                   color="steelblue", linewidths=0)
        ax.set_title(labels[tid], fontsize=9)
        ax.set_aspect("equal")
    colors = {"da1": "crimson", "pc1": "black"}
    for tid, name, vx, vy in arrows.rows():
        ax = axes[int(tid)]
        span = 0.45 * float(np.ptp(samples["y"][samples["target"] == tid]))
        ax.annotate("", xytext=(0, 0), xy=(span * vx, span * vy),
                    arrowprops=dict(arrowstyle="-|>", lw=2.0, color=colors.get(name, "gray")))
        ax.annotate(str(name).upper(), (span * vx, span * vy), fontsize=8,
                    color=colors.get(name, "gray"))
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    return _save(fig, [samples_csv, arrows_csv], out_path)


def plot_rho(rho_csv, out_path, log_y=False):
    """Trace-autocorrelation decay over lag."""
    table = read_table(rho_csv, ["tau", "rho"])
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.plot(table["tau"], table["rho"], color=_SSA_COLOR, lw=1.4)
    ax.set_xlabel("lag")
    ax.set_ylabel("trace autocorrelation")
    if log_y:
        ax.set_yscale("log")
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    return _save(fig, [rho_csv], out_path)


RENDERERS = {
    "null-overlay": plot_null_overlay,
    "sweeps": plot_sweeps,
    "planted": plot_planted,
    "ellipses": plot_ellipses,
    "rho": plot_rho,
}
