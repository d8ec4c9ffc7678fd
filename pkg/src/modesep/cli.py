"""Command-line front end.

Every experiment subcommand takes ``-o/--out`` for the run directory plus
flag overrides; ``--config FILE`` loads a JSON dict of keyword arguments
first, with explicit flags winning.  Exit codes: 0 success, 2 check-mode
assertion failure, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys

import numpy as np

from . import experiments as exp
from . import io as msio
from .autocov import LagGrid, rho_series
from .baselines import TicaConfig, knn_entropy, tica
from .da import AnalyticFloor, ProjectionTestConfig, select_lag_full
from .dynamics import SimConfig, simulate_canonical
from .ssa import ssa_estimate
from .stattests import dip_pvalue, matched_mc_null, silverman_test
from .targets import KdeModel, spec_from_json

__all__ = ["main"]


def _load_target(path):
    with open(path) as fh:
        return spec_from_json(fh.read())


def _load_samples(path):
    if path.endswith(".csv"):
        return msio.read_csv(path)
    return msio.read_samples(path)


def _merge_config(args, keys):
    """Config-file values overridden by explicitly passed flags."""
    merged = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        merged.update({k: v for k, v in loaded.items() if k in keys})
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


class _ExternalOracle:
    """Subprocess score oracle with moments estimated from the sample matrix."""

    def __init__(self, command, samples):
        self._sub = msio.SubprocessScore(shlex.split(command), dim=samples.shape[1])
        self.dim = samples.shape[1]
        mean = samples.mean(axis=0)
        centered = samples - mean
        cov = centered.T @ centered / samples.shape[0]
        self._moments = (mean, cov, float(np.trace(cov) / self.dim))

    def score(self, x):
        return self._sub.score(x)

    def moments(self):
        return self._moments

    def close(self):
        self._sub.close()


def _resolve_oracle(args):
    """Target spec from JSON, or a score oracle fit/attached to ingested samples.

    Sample files default to a KDE score; --score-cmd replaces it with an
    external process speaking the line-JSON contract ({"x": [..]} in,
    {"grad": [..]} out), e.g. a pretrained denoiser wrapper.
    """
    if args.target:
        target = _load_target(args.target)
        samples = target.sample(args.n_samples, exp.derive_seed(args.seed or 0, "cli_samples"))
        return target, samples
    samples = _load_samples(args.samples)
    if getattr(args, "score_cmd", None):
        return _ExternalOracle(args.score_cmd, samples), samples
    kde = KdeModel.from_samples(samples, bandwidth=args.bandwidth,
                                n_centers=args.kde_centers, seed=args.seed or 0)
    return kde, samples


def _simulate(target, samples, args):
    n_traj = args.n_traj or min(500, samples.shape[0])
    rng = np.random.default_rng(exp.derive_seed(args.seed or 0, "cli_init"))
    init = samples[rng.integers(0, samples.shape[0], size=n_traj)]
    cfg = SimConfig.for_target(target, n_traj=n_traj, dt=args.dt, t_phys=args.t_phys,
                               seed=args.seed or 0, snapshot_stride=args.stride)
    return simulate_canonical(target, init, cfg)


def cmd_ssa(args):
    target, samples = _resolve_oracle(args)
    try:
        ens = _simulate(target, samples, args)
    finally:
        if hasattr(target, "close"):
            target.close()
    series = rho_series(ens, LagGrid.uniform(ens.n_snapshots, ens.dt_snapshot),
                        retain_matrices=False)
    rep = ssa_estimate(series, threshold_mode=args.threshold_mode)
    # dagger convention: non-converged estimates are lower bounds
    flag = "" if rep.converged else " † (lower bound: stopping lag not reached)"
    print(f"SSA = {rep.s_hat:.4f}{flag}")
    print(f"stopping lag t_max = {rep.t_max:.4g}, threshold = {rep.threshold:.3g} "
          f"({rep.threshold_mode})")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, sort_keys=True, indent=2)
    return 0


def cmd_da(args):
    target, samples = _resolve_oracle(args)
    try:
        ens = _simulate(target, samples, args)
    finally:
        if hasattr(target, "close"):
            target.close()
    grid = LagGrid.with_log_tail(ens.n_snapshots, ens.dt_snapshot,
                                 linear_cap=8, n_log=args.n_lags)
    series = rho_series(ens, grid, retain_matrices=True)
    d = ens.dim
    floor = AnalyticFloor(gamma=d / ens.n_traj, peel=args.peel)
    rep = select_lag_full(series, samples, floor,
                          tests=ProjectionTestConfig(seed=exp.derive_seed(args.seed or 0, "tests")),
                          alpha=args.alpha)
    print("lag        count   lambda_plus")
    for t, c, f in zip(rep.lags_physical, rep.count_curve, rep.floor):
        print(f"{t:<10.4g} {c:<7d} {f:.4g}")
    print(f"m_hat = {rep.m_hat}, tau_star = {rep.tau_star:.4g}, "
          f"rho(tau_star) = {rep.rho_at_tau_star:.3f}")
    for v in rep.test_verdicts:
        print(f"  direction {v.rank + 1}: eig={v.eigenvalue:.4g} floor={v.floor_value:.4g} "
              f"[{v.floor_gate}] dip_p={v.dip_p} silverman_p={v.silverman_p}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, sort_keys=True, indent=2)
    if args.directions_out:
        msio.write_samples(args.directions_out, rep.directions.T)
    return 0


def cmd_dip(args):
    sample = msio.read_csv(args.input, expect_columns=1).ravel()
    res = dip_pvalue(sample, n_boot=args.n_boot, seed=args.seed or 0)
    print(f"dip = {res.statistic:.6f}  p = {res.p_value:.4g}  (n_boot = {res.n_boot})")
    return 0


def cmd_silverman(args):
    sample = msio.read_csv(args.input, expect_columns=1).ravel()
    res = silverman_test(sample, n_boot=args.n_boot, seed=args.seed or 0)
    print(f"critical bandwidth = {res.statistic:.6g}  p = {res.p_value:.4g}  "
          f"(n_boot = {res.n_boot})")
    return 0


def cmd_mc_null(args):
    samples = _load_samples(args.samples)
    with open(args.pipeline) as fh:
        pconf = json.load(fh)
    if pconf.get("kind", "simple_pair") != "simple_pair":
        raise msio.MatrixFormatError(f"unknown pipeline kind {pconf.get('kind')!r}")
    pipeline = exp.simple_pair_mc_pipeline(dt=pconf.get("dt", 0.01))
    null = matched_mc_null(samples, pconf["tau_star"], pipeline,
                           n_reps=args.n_reps, seed=args.seed or 0, alpha=args.alpha)
    print("rank   null_mean    null_q")
    for r in range(min(args.top, null.eigenvalues.shape[1])):
        print(f"{r + 1:<6d} {null.eigenvalues[:, r].mean():<12.4g} {null.quantile(r):.4g}")
    if args.out:
        msio.write_csv(args.out, null.eigenvalues,
                       header=[f"rank_{i + 1}" for i in range(null.eigenvalues.shape[1])])
    return 0


def cmd_tica(args):
    ens = msio.read_ensemble(args.ensemble)
    vals, vecs = tica(ens, TicaConfig(lag=args.lag, regularization_eps=args.eps))
    print("tica eigenvalues:", " ".join(f"{v:.4g}" for v in vals[: args.top]))
    if args.out:
        msio.write_csv(args.out, np.column_stack([vals, vecs.T]),
                       header=["eigenvalue"] + [f"v{i}" for i in range(vecs.shape[0])])
    return 0


def cmd_entropy(args):
    samples = _load_samples(args.input)
    h = knn_entropy(samples, k=args.k)
    print(f"kNN entropy (k={args.k}): {h:.4f} nats")
    return 0


def cmd_ingest(args):
    samples = _load_samples(args.input)
    print(f"ingested {samples.shape[0]} rows x {samples.shape[1]} columns")
    if args.out:
        if args.out.endswith(".csv"):
            msio.write_csv(args.out, samples)
        else:
            msio.write_samples(args.out, samples)
    if args.kde_summary:
        kde = KdeModel.from_samples(samples, n_centers=args.kde_centers, seed=args.seed or 0)
        print(f"kde oracle: {kde.centers.shape[0]} centers, bandwidth {kde.bandwidth:.6g} "
              "(Scott/2)")
    return 0


_EXPERIMENT_KEYS = {
    "ou-baseline": (exp.run_ou_baseline,
                    ["d", "n_traj", "dt", "t_phys", "short_t_phys", "sigma_sq", "stride",
                     "seeds", "check"]),
    "null-spectrum": (exp.run_null_spectrum, ["gamma", "tau", "sigma_sq", "n_grid"]),
    "null-overlay": (exp.run_null_overlay,
                     ["gammas", "taus", "n_pairs", "seeds", "bins", "sigma_sq"]),
    "planted": (exp.run_planted,
                ["d", "k", "c", "sigma_s", "n_traj", "dt", "t_phys", "stride", "seed"]),
    "gmm-sweep": (exp.run_gmm_sweep,
                  ["sweep", "values", "d", "n_traj", "dt", "t_phys", "stride", "seeds",
                   "n_mc_mi", "n_random", "bootstrap", "random_seed"]),
    "ellipses": (exp.run_ellipses,
                 ["n_traj", "dt", "t_phys", "stride", "n_samples", "seed", "n_boot"]),
    "dt-robustness": (exp.run_dt_robustness,
                      ["dts", "sweep", "values", "d", "n_traj", "t_phys", "snapshot_dt",
                       "seeds"]),
    "mc-null-check": (exp.run_mc_null_check,
                      ["d", "n_samples", "tau_star", "dt", "n_reps", "seed", "alpha"]),
}


def _make_experiment_handler(name):
    fn, keys = _EXPERIMENT_KEYS[name]

    def handler(args):
        kwargs = _merge_config(args, keys)
        report = fn(args.out, **kwargs)
        print(json.dumps({k: v for k, v in report.items() if k != "config"},
                         sort_keys=True, indent=2, default=str))
        return 0

    return handler


def _float_list(text):
    return [float(v) for v in text.split(",")]


def _int_list(text):
    return [int(v) for v in text.split(",")]


def build_parser():
    p = argparse.ArgumentParser(prog="modesep",
                                description="Mode-separation measurement from samples "
                                            "plus a score function")
    sub = p.add_subparsers(dest="command", required=True)

    for name in _EXPERIMENT_KEYS:
        sp = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        sp.add_argument("-o", "--out", required=True, help="run output directory")
        sp.add_argument("--config", help="JSON file of keyword arguments")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--seeds", type=_int_list)
        sp.add_argument("--d", type=int)
        sp.add_argument("--k", type=int)
        sp.add_argument("--c", type=float)
        sp.add_argument("--sigma-s", dest="sigma_s", type=float)
        sp.add_argument("--n-traj", dest="n_traj", type=int)
        sp.add_argument("--n-samples", dest="n_samples", type=int)
        sp.add_argument("--n-pairs", dest="n_pairs", type=int)
        sp.add_argument("--n-reps", dest="n_reps", type=int)
        sp.add_argument("--n-boot", dest="n_boot", type=int)
        sp.add_argument("--n-random", dest="n_random", type=int)
        sp.add_argument("--n-mc-mi", dest="n_mc_mi", type=int)
        sp.add_argument("--bootstrap", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--dts", type=_float_list)
        sp.add_argument("--t-phys", dest="t_phys", type=float)
        sp.add_argument("--short-t-phys", dest="short_t_phys", type=float)
        sp.add_argument("--snapshot-dt", dest="snapshot_dt", type=float)
        sp.add_argument("--stride", type=int)
        sp.add_argument("--sigma-sq", dest="sigma_sq", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--gammas", type=_float_list)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--taus", type=_float_list)
        sp.add_argument("--tau-star", dest="tau_star", type=float)
        sp.add_argument("--bins", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--sweep")
        sp.add_argument("--values", type=_float_list)
        sp.add_argument("--random-seed", dest="random_seed", type=int)
        if name == "ou-baseline":
            sp.add_argument("--check", action="store_true", default=None,
                            help="exit 2 unless the closed-form targets are met")
        sp.set_defaults(handler=_make_experiment_handler(name))

    for name, handler in (("ssa", cmd_ssa), ("da", cmd_da)):
        sp = sub.add_parser(name, help=f"run {name} on a target spec or sample file")
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--target", help="target spec JSON (gmm / planted / iso_gaussian)")
        src.add_argument("--samples", help="sample matrix (csv or binary); fits a KDE score")
        sp.add_argument("--n-traj", dest="n_traj", type=int)
        sp.add_argument("--n-samples", dest="n_samples", type=int, default=10000)
        sp.add_argument("--dt", type=float, default=0.01)
        sp.add_argument("--t-phys", dest="t_phys", type=float, default=20.0)
        sp.add_argument("--stride", type=int, default=5)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--bandwidth", type=float)
        sp.add_argument("--kde-centers", dest="kde_centers", type=int, default=2000)
        sp.add_argument("--score-cmd", dest="score_cmd",
                        help="external score process (line-JSON contract) used "
                             "instead of the KDE fit when --samples is given")
        sp.add_argument("-o", "--out", help="write the report JSON here")
        if name == "ssa":
            sp.add_argument("--threshold-mode", dest="threshold_mode",
                            choices=["universal", "plugin"], default="universal")
        else:
            sp.add_argument("--alpha", type=float, default=0.05)
            sp.add_argument("--peel", type=int, default=0)
            sp.add_argument("--n-lags", dest="n_lags", type=int, default=24)
            sp.add_argument("--directions-out", dest="directions_out")
        sp.set_defaults(handler=handler)

    sp = sub.add_parser("dip", help="dip test of unimodality on a 1-column CSV")
    sp.add_argument("input")
    sp.add_argument("--n-boot", dest="n_boot", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(handler=cmd_dip)

    sp = sub.add_parser("silverman", help="bandwidth test of unimodality on a 1-column CSV")
    sp.add_argument("input")
    sp.add_argument("--n-boot", dest="n_boot", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(handler=cmd_silverman)

    sp = sub.add_parser("mc-null", help="matched-pipeline Monte-Carlo noise floor")
    sp.add_argument("samples", help="sample matrix (csv or binary)")
    sp.add_argument("pipeline", help="pipeline config JSON (kind, tau_star, dt)")
    sp.add_argument("--n-reps", dest="n_reps", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--top", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out", help="write per-rank null eigenvalues CSV")
    sp.set_defaults(handler=cmd_mc_null)

    sp = sub.add_parser("tica", help="time-lagged component analysis of a stored ensemble")
    sp.add_argument("ensemble", help="ensemble in the binary matrix format")
    sp.add_argument("--lag", type=int, required=True)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--top", type=int, default=5)
    sp.add_argument("-o", "--out")
    sp.set_defaults(handler=cmd_tica)

    sp = sub.add_parser("entropy", help="kNN differential entropy of a sample matrix")
    sp.add_argument("input")
    sp.add_argument("--k", type=int, default=5)
    sp.set_defaults(handler=cmd_entropy)

    sp = sub.add_parser("ingest", help="validate/convert a sample file (csv <-> binary)")
    sp.add_argument("input")
    sp.add_argument("-o", "--out")
    sp.add_argument("--kde-summary", action="store_true")
    sp.add_argument("--kde-centers", dest="kde_centers", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(handler=cmd_ingest)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except exp.CheckFailure as e:
        print(f"check failed: {e}", file=sys.stderr)
        return 2
    except (msio.MatrixFormatError, FileNotFoundError, json.JSONDecodeError, KeyError,
            ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
