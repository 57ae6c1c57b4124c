"""Command-line interface: ``sparsity-sketch <command> ...``.

Environment overrides: ``SPARSITY_SKETCH_SEED`` replaces the default seed
and ``SPARSITY_SKETCH_OUT`` the default output directory.  Explicit
command-line options win over both.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from typing import List, Optional

import numpy as np

from . import __version__
from .adversarial import lemma1_bound, minimax_lower_bound
from .errors import ParameterError
from .experiments import (
    Experiment,
    ExperimentConfig,
    make_power_law_signal,
    run_adversarial_demo,
    run_fig2,
    run_fig3,
    run_rank_coverage,
)
from .io import (
    read_matrix_csv,
    read_signal_csv,
    read_sketch_csv,
    write_key_values,
    write_rows_csv,
    write_signal_csv,
    write_sketch_csv,
)
from .rank_sketch import acquire_matrix_sketch, estimate_effective_rank
from .recovery import recover_with_estimated_sparsity
from .sketch_estimation import NoiseSpec, acquire_sketch, estimate_sparsity
from .sparsity_measures import effective_rank, numerical_sparsity
from .stable_sampling import RngStream

ENV_SEED = "SPARSITY_SKETCH_SEED"
ENV_OUT = "SPARSITY_SKETCH_OUT"

# Built-in experiment settings used when no --config is given.
PRESETS = {
    "fig2": dict(experiment="relative_error_vs_n", p=[100, 1000, 10000], nu=[1.0],
                 n_grid=[250, 500, 1000, 2000, 4000], rho_grid=[0.01], trials=100),
    "fig2-rho": dict(experiment="relative_error_vs_rho", p=[10000], nu=[1.0],
                     n_grid=[500, 1000, 2000], rho_grid=[0.0, 0.01, 0.05, 0.1, 0.2], trials=100),
    "fig2-s": dict(experiment="relative_error_vs_n", p=[10000], nu=[2.0, 1.0, 0.5, 0.1],
                   n_grid=[250, 500, 1000, 2000, 4000], rho_grid=[0.01], trials=100),
    "fig3": dict(experiment="reconstruction", p=[1000], nu=[0.7, 1.0, 1.3], sigma0=1e-3,
                 trials=25, n1=500, n2=500),
    "fig3-full": dict(experiment="reconstruction", p=[10000], nu=[0.7, 1.0, 1.3], sigma0=1e-3,
                      trials=25, n1=500, n2=500),
    "rank-coverage": dict(experiment="rank_coverage", p=[100], n_grid=[1000], rho_grid=[0.01],
                          rank=10, trials=500),
}


def _env_seed(default: int = 0) -> int:
    v = os.environ.get(ENV_SEED)
    return int(v) if v not in (None, "") else default


def _env_out(default: str = "results") -> str:
    return os.environ.get(ENV_OUT) or default


def _load_signal(args) -> np.ndarray:
    if args.signal:
        return read_signal_csv(args.signal)
    return make_power_law_signal(args.p, args.nu)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def cmd_estimate(args) -> int:
    if args.sketch:
        sk = read_sketch_csv(args.sketch)
        s_true = None
    else:
        x = _load_signal(args)
        noise = NoiseSpec(args.sigma0, "uniform" if args.sigma0 > 0 else "none")
        sk = acquire_sketch(x, args.n1, args.n2, args.gamma, noise, RngStream(args.seed))
        s_true = numerical_sparsity(x)
        if args.save_sketch:
            write_sketch_csv(args.save_sketch, sk)
    rho = args.rho
    if rho is None and sk.sigma0 > 0:
        if s_true is None:
            raise ParameterError("--rho is required for a noisy sketch read from file")
        rho = sk.sigma0 / (sk.gamma * float(np.linalg.norm(x)))
    est = estimate_sparsity(sk, args.alpha, rho)
    print(f"s_hat = {_fmt(est.s_hat)}")
    print(f"ci = [{_fmt(est.ci_low)}, {_fmt(est.ci_high)}]  (level {1 - 2 * args.alpha:.3g}**2, n = {est.n})")
    print(f"l1_hat = {_fmt(est.t1_hat)}  l2_hat = {_fmt(est.t2_hat)}")
    if s_true is not None:
        print(f"s_true = {_fmt(s_true)}")
    return 0


def cmd_rank(args) -> int:
    X = read_matrix_csv(args.matrix)
    noise = NoiseSpec(args.sigma0, "uniform" if args.sigma0 > 0 else "none")
    sk = acquire_matrix_sketch(X, args.n1, args.n2, args.gamma, noise, RngStream(args.seed))
    varrho = args.varrho
    if varrho is None and args.sigma0 > 0:
        varrho = args.sigma0 / (args.gamma * float(np.linalg.norm(X)))
    est = estimate_effective_rank(sk, args.alpha, varrho)
    print(f"r_hat = {_fmt(est.r_hat)}")
    print(f"ci = [{_fmt(est.ci_low)}, {_fmt(est.ci_high)}]  (level {1 - 2 * args.alpha:.3g}, n = {est.n})")
    print(f"r_true = {_fmt(effective_rank(X))}")
    return 0


def cmd_recover(args) -> int:
    x = _load_signal(args)
    rng = RngStream(args.seed)
    res = recover_with_estimated_sparsity(x, args.gamma, args.sigma0, rng, args.n1, args.n2,
                                          args.alpha, args.tol, args.max_iter)
    err = float(np.linalg.norm(res.x_hat - x) / np.linalg.norm(x))
    print(f"s_hat = {_fmt(res.s_hat)}  n_hat = {res.n_hat}  n_used = {res.n_used}")
    print(f"relative_error = {_fmt(err)}  converged = {res.converged}  "
          f"iterations = {res.bp_iterations}  rel_gap = {res.gap / max(res.l1_value, 1e-300):.3g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_signal_csv(os.path.join(args.out, "signal.csv"), x)
        write_signal_csv(os.path.join(args.out, "reconstruction.csv"), res.x_hat)
        # one descriptor per stacked row group; together they regenerate A
        for k, d in enumerate(res.operators):
            write_key_values(os.path.join(args.out, f"operator_{k}.txt"), d)
        print(f"wrote signal.csv, reconstruction.csv and {len(res.operators)} operator "
              f"descriptor(s) to {args.out}/")
    return 0


def _config(args, preset: str) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig(**PRESETS[preset])
    seed = args.seed if args.seed is not None else (
        _env_seed(cfg.seed) if os.environ.get(ENV_SEED) else None)
    return cfg.with_overrides(seed=seed, trials=args.trials)


def cmd_experiment(args) -> int:
    from .plotting import PlotSpec, emit_svg_plot, plot_signal_pair

    preset = args.preset or args.which
    cfg = _config(args, preset)
    out = args.out or _env_out()
    os.makedirs(out, exist_ok=True)
    which = args.which
    if which == "fig2":
        if cfg.experiment not in (Experiment.RELATIVE_ERROR_VS_N, Experiment.RELATIVE_ERROR_VS_RHO):
            raise ParameterError(f"config is for {cfg.experiment.value}, not fig2")
        table = run_fig2(cfg)
        if cfg.experiment is Experiment.RELATIVE_ERROR_VS_RHO:
            spec = PlotSpec("mean_rel_err", x="rho", series=["n"], logx=False,
                            xlabel="rho", ylabel="mean |s_hat/s - 1|")
        else:
            spec = PlotSpec("mean_rel_err", x="n", series=["p", "nu"], reference="theory",
                            xlabel="n = n1 + n2", ylabel="mean |s_hat/s - 1|")
    elif which == "fig3":
        if cfg.experiment is not Experiment.RECONSTRUCTION:
            raise ParameterError(f"config is for {cfg.experiment.value}, not fig3")
        table = run_fig3(cfg, out)
        for p in cfg.p:
            for nu in cfg.nu:
                stem = os.path.join(out, f"fig3_p{p}_nu{nu!r}")
                plot_signal_pair(read_signal_csv(stem + "_signal.csv"),
                                 read_signal_csv(stem + "_reconstruction.csv"),
                                 stem + ".svg", title=f"p={p}, nu={nu:g}")
        spec = None
    else:
        if cfg.experiment is not Experiment.RANK_COVERAGE:
            raise ParameterError(f"config is for {cfg.experiment.value}, not rank-coverage")
        table = run_rank_coverage(cfg)
        spec = PlotSpec("coverage", x="n", series=["p", "rho"], logy=False,
                        xlabel="n = n1 + n2", ylabel="coverage")
    name = cfg.experiment.value
    table.to_csv(os.path.join(out, f"{name}.csv"))
    write_key_values(os.path.join(out, f"{name}_config.txt"), cfg.as_dict())
    if spec is not None:
        emit_svg_plot(table, spec, os.path.join(out, f"{name}.svg"))
    _summarize(table)
    print(f"wrote results to {out}/")
    return 0


def _summarize(table) -> None:
    for r in table.sorted_rows():
        if r[6] == -1:
            print(f"  p={r[2]} nu={r[3]:g} n={r[4]} rho={r[5]:g}  {r[7]} = {r[8]}")


def cmd_adversarial(args) -> int:
    out = args.out or _env_out()
    os.makedirs(out, exist_ok=True)
    seed = args.seed if args.seed is not None else _env_seed()
    cfg = ExperimentConfig(experiment="adversarial_demo", p=args.p, n_grid=args.n, seed=seed,
                           trials=args.trials)
    table = run_adversarial_demo(cfg, out)
    rows = []
    for p in cfg.p:
        for n in cfg.n_grid:
            def get(stat):
                v = table.values(stat, p=p, n=n)
                return float(v[0]) if v.size else math.nan
            rows.append((p, n, get("bound"), get("attained_s"), get("s_base"), int(get("retries")),
                         get("minimax_bound")))
    path = os.path.join(out, "adversarial_demo.csv")
    write_rows_csv(path, ["p", "n", "bound", "attained_s", "s_base", "retries", "minimax_bound"], rows)
    print("p,n,bound,attained_s,s_base,retries,minimax_bound")
    for r in rows:
        print(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in r))
    print(f"wrote {path}")
    return 0


def cmd_bounds(args) -> int:
    print("p,n,lemma_bound,minimax_bound")
    for p in args.p:
        for n in args.n:
            lb = lemma1_bound(p, n) if n < p else math.nan
            print(f"{p},{n},{_fmt(lb)},{_fmt(minimax_lower_bound(p, n))}")
    return 0


def _add_signal_args(sp, need_signal=True):
    g = sp.add_argument_group("signal")
    g.add_argument("--signal", help="signal CSV (index,value)")
    g.add_argument("--p", type=int, default=1000, help="power-law length (default 1000)")
    g.add_argument("--nu", type=float, default=1.0, help="power-law exponent (default 1)")


def _add_sketch_args(sp):
    sp.add_argument("--n1", type=int, default=500)
    sp.add_argument("--n2", type=int, default=500)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--sigma0", type=float, default=0.0)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsity-sketch",
                                 description="Estimate numerical sparsity and effective rank from random sketches.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="estimate s(x) with a confidence interval")
    _add_signal_args(sp)
    _add_sketch_args(sp)
    sp.add_argument("--sketch", help="read measurements from a sketch CSV instead")
    sp.add_argument("--save-sketch", help="write the measurements to this sketch CSV")
    sp.add_argument("--rho", type=float, default=None,
                    help="noise ratio bound sigma0/(gamma ||x||_2); computed from x when omitted")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("rank", help="estimate the effective rank of a PSD matrix")
    sp.add_argument("--matrix", required=True, help="matrix CSV (row,col,value)")
    _add_sketch_args(sp)
    sp.add_argument("--varrho", type=float, default=None)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("recover", help="estimate s(x), size n, and reconstruct by Basis Pursuit")
    _add_signal_args(sp)
    _add_sketch_args(sp)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=5000)
    sp.add_argument("--out", help="directory for signal/reconstruction CSVs")
    sp.set_defaults(func=cmd_recover, sigma0=1e-3)

    sp = sub.add_parser("experiment", help="run a simulation study")
    sp.add_argument("which", choices=["fig2", "fig3", "rank-coverage"])
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="built-in settings (default: by name)")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./results)")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("adversarial-demo", help="indistinguishable pairs for a fixed design")
    sp.add_argument("--p", type=int, nargs="+", default=[100, 500])
    sp.add_argument("--n", type=int, nargs="+", default=[20])
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--trials", type=int, default=25,
                    help="randomized sketches of x_tilde for the contrast column")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_adversarial)

    sp = sub.add_parser("bounds", help="print the deterministic-design bounds")
    sp.add_argument("--p", type=int, nargs="+", required=True)
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.set_defaults(func=cmd_bounds)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", "absent") is None and args.command in ("estimate", "rank", "recover"):
        args.seed = _env_seed()
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except (ParameterError, ValueError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
