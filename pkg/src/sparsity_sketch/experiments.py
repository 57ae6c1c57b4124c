"""Deterministic simulation runs and their tabular output.

Every trial gets its own stream ``RngStream(seed, (k, t))`` where ``k``
indexes the grid point and ``t`` the trial, so any trial can be rerun alone
and the aggregates do not depend on execution order.  Results are collected
in a long-format :class:`ResultTable` whose CSV form is byte-stable.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .adversarial import dense_null_perturbation, lemma1_bound, minimax_lower_bound
from .errors import ConstructionFailedError, ParameterError
from .io import fmt_float, read_key_values, write_rows_csv, write_signal_csv
from .rank_sketch import acquire_matrix_sketch, estimate_effective_rank
from .recovery import recover_with_estimated_sparsity
from .sketch_estimation import (
    NoiseSpec,
    acquire_sketch,
    acquire_sketch_by_law,
    estimate_sparsity,
    theoretical_relative_error,
)
from .sparsity_measures import effective_rank, numerical_sparsity
from .stable_sampling import RngStream

__all__ = [
    "Experiment",
    "ExperimentConfig",
    "ResultTable",
    "make_power_law_signal",
    "run_fig2",
    "run_fig3",
    "run_rank_coverage",
    "run_adversarial_demo",
    "run_experiment",
    "TABLE_COLUMNS",
]


class Experiment(enum.Enum):
    RELATIVE_ERROR_VS_N = "relative_error_vs_n"
    RELATIVE_ERROR_VS_RHO = "relative_error_vs_rho"
    RECONSTRUCTION = "reconstruction"
    ADVERSARIAL_DEMO = "adversarial_demo"
    RANK_COVERAGE = "rank_coverage"

    @classmethod
    def parse(cls, v) -> "Experiment":
        if isinstance(v, cls):
            return v
        key = str(v).strip()
        # accept CamelCase spellings as well
        snake = "".join("_" + c.lower() if c.isupper() else c for c in key).lstrip("_")
        for e in cls:
            if key.lower() == e.value or snake == e.value or key.upper() == e.name:
                return e
        aliases = {"fig2": cls.RELATIVE_ERROR_VS_N, "fig2-rho": cls.RELATIVE_ERROR_VS_RHO,
                   "fig3": cls.RECONSTRUCTION, "rank-coverage": cls.RANK_COVERAGE,
                   "adversarial-demo": cls.ADVERSARIAL_DEMO}
        if key.lower() in aliases:
            return aliases[key.lower()]
        raise ParameterError(f"unknown experiment {v!r}")


def _floats(v) -> List[float]:
    if isinstance(v, str):
        return [float(s) for s in v.split(",") if s.strip()]
    if np.ndim(v) == 0:
        return [float(v)]
    return [float(e) for e in v]


def _ints(v) -> List[int]:
    out = []
    for f in _floats(v):
        if f != int(f):
            raise ParameterError(f"expected an integer, got {f}")
        out.append(int(f))
    return out


@dataclass
class ExperimentConfig:
    """Settings for one experiment run.

    List fields are grids; the run covers their Cartesian product.  ``n_grid``
    holds total measurement counts ``n = n1 + n2`` with ``n1 = n2 = n/2`` for
    the sparsity and rank experiments; the reconstruction experiment instead
    uses ``n1``/``n2`` for the preliminary sketch.  For the adversarial demo
    ``n_grid`` lists the row counts of the deterministic design.

    ``sketch`` selects how sparsity sketches are simulated: ``"law"`` draws
    the projections from their exact distribution (fast), ``"full"`` draws
    the measurement rows.
    """

    experiment: Experiment = Experiment.RELATIVE_ERROR_VS_N
    p: List[int] = field(default_factory=lambda: [1000])
    nu: List[float] = field(default_factory=lambda: [1.0])
    n_grid: List[int] = field(default_factory=lambda: [1000])
    rho_grid: List[float] = field(default_factory=lambda: [0.01])
    gamma: float = 1.0
    sigma0: float = 1e-3
    alpha: float = 0.05
    trials: int = 100
    seed: int = 0
    sketch: str = "law"
    n1: int = 500
    n2: int = 500
    rank: int = 10
    tol: float = 1e-6
    max_iter: int = 5000

    def __post_init__(self):
        self.experiment = Experiment.parse(self.experiment)
        self.p = _ints(self.p)
        self.nu = _floats(self.nu)
        self.n_grid = _ints(self.n_grid)
        self.rho_grid = _floats(self.rho_grid)
        for name in ("p", "nu", "n_grid", "rho_grid"):
            if not getattr(self, name):
                raise ParameterError(f"{name} grid must be non-empty")
        if min(self.p) < 1 or min(self.n_grid) < 1:
            raise ParameterError("p and n grid values must be positive")
        if min(self.nu) < 0 or min(self.rho_grid) < 0:
            raise ParameterError("nu and rho grid values must be non-negative")
        self.trials = int(self.trials)
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if not self.gamma > 0 or not self.sigma0 >= 0:
            raise ParameterError("gamma must be positive and sigma0 non-negative")
        if not 0 < self.alpha < 0.5:
            raise ParameterError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.sketch not in ("law", "full"):
            raise ParameterError(f"sketch must be 'law' or 'full', got {self.sketch!r}")

    @classmethod
    def from_mapping(cls, d: Dict[str, str]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in known:
                raise ParameterError(f"unknown config key {k!r}")
            if k in ("p", "nu", "n_grid", "rho_grid", "experiment", "sketch"):
                kwargs[k] = v
            elif k in ("trials", "seed", "n1", "n2", "rank", "max_iter"):
                kwargs[k] = int(float(v)) if "e" in str(v).lower() else int(v)
            else:
                kwargs[k] = float(v)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(read_key_values(path))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> Dict[str, object]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, Experiment) else v
        return out


TABLE_COLUMNS = ["experiment", "seed", "p", "nu", "n", "rho", "trial", "statistic", "value"]


@dataclass
class ResultTable:
    """Long-format results: one ``statistic = value`` per row.

    ``trial`` is ``-1`` for aggregates over trials.  Grid fields that do not
    apply to a row are ``nan``.
    """

    rows: List[tuple] = field(default_factory=list)

    def add(self, experiment, seed, p, nu, n, rho, trial, statistic, value):
        self.rows.append((experiment, int(seed), int(p), float(nu), int(n), float(rho), int(trial),
                          str(statistic), value))

    def __len__(self):
        return len(self.rows)

    def select(self, statistic: str, **where) -> List[tuple]:
        idx = {c: i for i, c in enumerate(TABLE_COLUMNS)}
        out = []
        for r in self.rows:
            if r[7] != statistic:
                continue
            if all(_same(r[idx[k]], v) for k, v in where.items()):
                out.append(r)
        return out

    def values(self, statistic: str, **where) -> np.ndarray:
        return np.array([float(r[8]) for r in self.select(statistic, **where)])

    def sorted_rows(self) -> List[tuple]:
        # canonical order makes output independent of trial execution order
        return sorted(self.rows, key=lambda r: (r[0], r[2], _key(r[3]), r[4], _key(r[5]), r[6] < 0,
                                                r[6], r[7]))

    def to_csv(self, path) -> None:
        write_rows_csv(path, TABLE_COLUMNS, self.sorted_rows())

    def to_csv_text(self) -> str:
        lines = [",".join(TABLE_COLUMNS)]
        lines += [",".join(fmt_float(v) for v in r) for r in self.sorted_rows()]
        return "\n".join(lines) + "\n"

    def extend(self, other: "ResultTable") -> None:
        self.rows.extend(other.rows)


def _key(v: float):
    # nan sorts last and compares equal to itself
    return (1, 0.0) if math.isnan(v) else (0, v)


def _same(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return float(a) == float(b) or (math.isnan(float(a)) and math.isnan(float(b)))
    return a == b


def make_power_law_signal(p: int, nu: float) -> np.ndarray:
    """``x_i = i**-nu`` for ``i = 1..p``, scaled to unit l2 norm (sorted decreasing)."""
    if int(p) != p or p < 1:
        raise ParameterError(f"p must be a positive integer, got {p}")
    if not nu >= 0:
        raise ParameterError(f"nu must be non-negative, got {nu}")
    x = np.arange(1, int(p) + 1, dtype=float) ** (-float(nu))
    return x / np.linalg.norm(x)


# --- sparsity relative error ---------------------------------------------------

def run_fig2(cfg: ExperimentConfig, trial_order: Optional[Sequence[int]] = None) -> ResultTable:
    """Relative error ``|s_hat/s - 1|`` of the sparsity estimate over a grid.

    For each ``(p, nu, n, rho)`` point, ``trials`` independent instances are
    measured with ``n1 = n2 = n/2`` rows and noise ``Uniform[-sigma0, sigma0]``
    with ``sigma0 = rho gamma ||x||_2``.  Per-trial rows hold the clamped
    ``s_hat``, ``rel_err`` (from the unclamped ratio) and ``covered``; aggregate rows hold the mean and median
    relative error, the coverage rate, and the interval-implied error bound
    at level 0.25 (``theory``).

    ``trial_order`` permutes execution order (for testing order independence).
    """
    name = cfg.experiment.value
    table = ResultTable()
    grid = list(itertools.product(cfg.p, cfg.nu, cfg.n_grid, cfg.rho_grid))
    order = list(range(cfg.trials)) if trial_order is None else list(trial_order)
    if sorted(order) != list(range(cfg.trials)):
        raise ParameterError("trial_order must be a permutation of range(trials)")
    acquire = acquire_sketch_by_law if cfg.sketch == "law" else acquire_sketch
    for k, (p, nu, n, rho) in enumerate(grid):
        if n < 2:
            raise ParameterError("n must be at least 2 (n1 = n2 = n/2)")
        x = make_power_law_signal(p, nu)
        s = numerical_sparsity(x)
        half = n // 2
        sigma0 = rho * cfg.gamma * float(np.linalg.norm(x))
        noise = NoiseSpec(sigma0, "uniform" if sigma0 > 0 else "none")
        errs = {}
        cov = {}
        for t in order:
            sk = acquire(x, half, half, cfg.gamma, noise, RngStream(cfg.seed, (k, t)))
            est = estimate_sparsity(sk, cfg.alpha, rho)
            # the error of the estimator itself; clamping to [1, p] is for reporting
            errs[t] = abs(est.s_hat_raw / s - 1.0)
            cov[t] = est.covers(s)
            table.add(name, cfg.seed, p, nu, 2 * half, rho, t, "s_hat", est.s_hat)
            table.add(name, cfg.seed, p, nu, 2 * half, rho, t, "rel_err", errs[t])
            table.add(name, cfg.seed, p, nu, 2 * half, rho, t, "covered", bool(cov[t]))
        e = np.array([errs[t] for t in range(cfg.trials)])
        agg = {
            "s_true": s,
            "mean_rel_err": float(np.mean(e)),
            "median_rel_err": float(np.median(e)),
            "coverage": float(np.mean([cov[t] for t in range(cfg.trials)])),
            "theory": theoretical_relative_error(0.25, rho, 2 * half),
        }
        for stat, v in agg.items():
            table.add(name, cfg.seed, p, nu, 2 * half, rho, -1, stat, v)
    return table


# --- reconstruction ------------------------------------------------------------

def run_fig3(cfg: ExperimentConfig, out_dir=None,
             trial_order: Optional[Sequence[int]] = None) -> ResultTable:
    """Sparsity-adaptive Basis Pursuit reconstructions of power-law signals.

    For each ``nu`` and ``p``, ``trials`` runs of
    :func:`~sparsity_sketch.recovery.recover_with_estimated_sparsity` are
    made with an ``n1 + n2`` preliminary sketch.  The run with the median
    reconstruction error (lower median for even counts) has its signal and
    reconstruction written to ``out_dir`` as
    ``fig3_p{p}_nu{nu}_signal.csv`` / ``..._reconstruction.csv``.
    """
    name = cfg.experiment.value
    table = ResultTable()
    order = list(range(cfg.trials)) if trial_order is None else list(trial_order)
    for k, (p, nu) in enumerate(itertools.product(cfg.p, cfg.nu)):
        x = make_power_law_signal(p, nu)
        s = numerical_sparsity(x)
        runs = {}
        for t in order:
            r = recover_with_estimated_sparsity(
                x, cfg.gamma, cfg.sigma0, RngStream(cfg.seed, (k, t)), cfg.n1, cfg.n2,
                cfg.alpha, cfg.tol, cfg.max_iter)
            err = float(np.linalg.norm(r.x_hat - x) / np.linalg.norm(x))
            runs[t] = (err, r)
            n = r.n_used
            for stat, v in (("rel_err", err), ("s_hat", r.s_hat), ("n_hat", r.n_hat),
                            ("n_used", r.n_used), ("extra_rows", r.extra_rows),
                            ("converged", bool(r.converged)), ("iterations", r.bp_iterations),
                            ("rel_gap", r.gap / max(r.l1_value, 1e-300)),
                            ("residual_norm", r.residual_norm), ("eps0", r.eps0)):
                table.add(name, cfg.seed, p, nu, n, float("nan"), t, stat, v)
        errs = np.array([runs[t][0] for t in range(cfg.trials)])
        med_t = int(np.argsort(errs, kind="stable")[(cfg.trials - 1) // 2])
        n_hats = [runs[t][1].n_hat for t in range(cfg.trials)]
        agg = {
            "s_true": s,
            "median_rel_err": float(np.median(errs)),
            "mean_rel_err": float(np.mean(errs)),
            "median_n_hat": float(np.median(n_hats)),
            "converged_fraction": float(np.mean([runs[t][1].converged for t in range(cfg.trials)])),
            "median_trial": med_t,
        }
        for stat, v in agg.items():
            table.add(name, cfg.seed, p, nu, 0, float("nan"), -1, stat, v)
        if out_dir is not None:
            stem = os.path.join(out_dir, f"fig3_p{p}_nu{fmt_float(nu)}")
            write_signal_csv(stem + "_signal.csv", x)
            write_signal_csv(stem + "_reconstruction.csv", runs[med_t][1].x_hat)
    return table


# --- effective rank coverage ----------------------------------------------------

def projection_matrix(p: int, rank: int) -> np.ndarray:
    """``diag(1, ..., 1, 0, ..., 0)`` with ``rank`` ones; ``r(X) = rank``."""
    if not 1 <= rank <= p:
        raise ParameterError(f"rank must lie in [1, {p}], got {rank}")
    X = np.zeros((p, p))
    X[np.arange(rank), np.arange(rank)] = 1.0
    return X


def run_rank_coverage(cfg: ExperimentConfig,
                      trial_order: Optional[Sequence[int]] = None) -> ResultTable:
    """Coverage of the effective-rank interval on a rank-``cfg.rank`` projection.

    ``rho_grid`` is read as the noise ratio ``varrho``; the noise level is
    ``sigma0 = varrho gamma ||X||_F``.
    """
    name = cfg.experiment.value
    table = ResultTable()
    nan = float("nan")
    order = list(range(cfg.trials)) if trial_order is None else list(trial_order)
    for k, (p, n, vr) in enumerate(itertools.product(cfg.p, cfg.n_grid, cfg.rho_grid)):
        X = projection_matrix(p, cfg.rank)
        r = effective_rank(X)
        half = n // 2
        sigma0 = vr * cfg.gamma * float(np.linalg.norm(X))
        noise = NoiseSpec(sigma0, "uniform" if sigma0 > 0 else "none")
        cov = {}
        errs = {}
        for t in order:
            sk = acquire_matrix_sketch(X, half, half, cfg.gamma, noise, RngStream(cfg.seed, (k, t)),
                                       validate=False)
            est = estimate_effective_rank(sk, cfg.alpha, vr)
            cov[t] = est.covers(r)
            errs[t] = abs(est.r_hat_raw / r - 1)
            table.add(name, cfg.seed, p, nan, 2 * half, vr, t, "r_hat", est.r_hat)
            table.add(name, cfg.seed, p, nan, 2 * half, vr, t, "covered", bool(cov[t]))
        table.add(name, cfg.seed, p, nan, 2 * half, vr, -1, "rank", cfg.rank)
        table.add(name, cfg.seed, p, nan, 2 * half, vr, -1, "r_true", r)
        table.add(name, cfg.seed, p, nan, 2 * half, vr, -1, "coverage",
                  float(np.mean([cov[t] for t in range(cfg.trials)])))
        table.add(name, cfg.seed, p, nan, 2 * half, vr, -1, "median_rel_err",
                  float(np.median([errs[t] for t in range(cfg.trials)])))
    return table


# --- deterministic designs -----------------------------------------------------

def run_adversarial_demo(cfg: ExperimentConfig, out_dir=None) -> ResultTable:
    """Construct indistinguishable pairs for Gaussian designs of size ``n x p``.

    For each ``(p, n)`` with ``n < p`` the design ``A`` is drawn once from
    the grid stream, ``x = e_1`` and the dense perturbation is searched with
    up to 1000 draws.  Recorded: the guaranteed sparsity ``bound``, the
    attained ``s(x_tilde)``, ``s_base``, ``retries``, the relative
    indistinguishability residual and the minimax error floor.  As a
    contrast, ``trials`` randomized sketches of ``x_tilde`` with ``n1 = n2 =
    n/2`` report the median relative error of ``s_hat``.
    """
    name = cfg.experiment.value
    table = ResultTable()
    for k, (p, n) in enumerate(itertools.product(cfg.p, cfg.n_grid)):
        if n >= p:
            raise ParameterError(f"the demo needs n < p, got n={n}, p={p}")
        rng = RngStream(cfg.seed, (k,))
        A = rng.child(0).generator().standard_normal((n, p))
        x = np.zeros(p)
        x[0] = 1.0
        row = dict(bound=lemma1_bound(p, n), minimax_bound=minimax_lower_bound(p, n), s_base=1.0)
        try:
            pair = dense_null_perturbation(A, x, rng.child(1), max_retries=1000)
        except ConstructionFailedError as e:
            row.update(attained_s=e.best_s, retries=e.retries, success=False)
            pair = None
        else:
            d = pair.x_tilde - pair.x_base
            resid = float(np.linalg.norm(A @ d) / (np.linalg.norm(A) * np.linalg.norm(d)))
            row.update(attained_s=pair.attained_s, retries=pair.retries, success=True,
                       residual_ratio=resid)
            if n >= 2:
                st = numerical_sparsity(pair.x_tilde)
                errs = []
                for t in range(cfg.trials):
                    sk = acquire_sketch_by_law(pair.x_tilde, n // 2, n // 2, cfg.gamma,
                                               rng=rng.child(2, t))
                    errs.append(abs(estimate_sparsity(sk, cfg.alpha).s_hat_raw / st - 1))
                row["random_sketch_median_rel_err"] = float(np.median(errs))
        for stat, v in row.items():
            table.add(name, cfg.seed, p, float("nan"), n, float("nan"), -1, stat, v)
        if out_dir is not None and pair is not None:
            stem = os.path.join(out_dir, f"adversarial_p{p}_n{n}")
            write_signal_csv(stem + "_x_base.csv", pair.x_base)
            write_signal_csv(stem + "_x_tilde.csv", pair.x_tilde)
    return table


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ResultTable:
    e = cfg.experiment
    if e in (Experiment.RELATIVE_ERROR_VS_N, Experiment.RELATIVE_ERROR_VS_RHO):
        return run_fig2(cfg)
    if e is Experiment.RECONSTRUCTION:
        return run_fig3(cfg, out_dir)
    if e is Experiment.RANK_COVERAGE:
        return run_rank_coverage(cfg)
    return run_adversarial_demo(cfg, out_dir)
