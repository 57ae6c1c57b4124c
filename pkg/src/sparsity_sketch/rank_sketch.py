"""Effective-rank estimation for PSD matrices from linear measurements.

``n1`` trace probes ``<gamma I, X>`` estimate ``tr(X)`` (for PSD ``X`` this is
the l1 norm of the spectrum) and ``n2`` Gaussian probes ``<gamma Z_i, X>``
estimate ``||X||_F``.  The Gaussian probe matrices are never stored: they are
the rows of a streamed ``n2 x p**2`` operator acting on ``vec(X)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateSketchError, HypothesisViolationError, ParameterError
from .operators import StreamedOperator
from .sketch_estimation import NOISELESS, NoiseSpec, _check_sizes, normal_quantile
from .sparsity_measures import check_psd
from .stable_sampling import RngStream, StableKind

__all__ = [
    "MatrixSketch",
    "RankEstimate",
    "acquire_matrix_sketch",
    "estimate_effective_rank",
    "probe_operator",
]


@dataclass(eq=False)
class MatrixSketch:
    y_trace: np.ndarray
    y_frob: np.ndarray
    gamma: float
    p: int
    sigma0: float = 0.0
    rng: Optional[RngStream] = None
    probe_operator: Optional[StreamedOperator] = field(default=None, repr=False)

    def __post_init__(self):
        self.y_trace = np.atleast_1d(np.asarray(self.y_trace, dtype=float))
        self.y_frob = np.atleast_1d(np.asarray(self.y_frob, dtype=float))
        if self.y_trace.size < 1 or self.y_frob.size < 1:
            raise ParameterError("both measurement blocks must be non-empty")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")

    @property
    def n1(self) -> int:
        return self.y_trace.size

    @property
    def n2(self) -> int:
        return self.y_frob.size


@dataclass(frozen=True)
class RankEstimate:
    t1_breve: float
    t2_breve: float
    r_hat: float
    r_hat_raw: float
    ci_low: float
    ci_high: float
    alpha: float
    varrho: float
    n: int
    zeta: float
    p: int
    unbalanced: bool = False

    def covers(self, r: float) -> bool:
        return self.ci_low <= r <= self.ci_high


def probe_operator(p: int, n2: int, gamma: float, rng: RngStream) -> StreamedOperator:
    """Operator whose row ``i`` is ``gamma * vec(Z_i)`` (row-major)."""
    return StreamedOperator(StableKind.GAUSSIAN, int(n2), int(p) * int(p), gamma, rng)


def acquire_matrix_sketch(X, n1: int, n2: int, gamma: float = 1.0, noise: NoiseSpec = NOISELESS,
                          rng: RngStream = RngStream(0), validate: bool = True) -> MatrixSketch:
    """Take ``n1`` trace probes and ``n2`` Gaussian probes of a PSD matrix.

    Sub-streams: ``child(1)`` Gaussian probes, ``child(2)`` noise.
    """
    X = check_psd(X) if validate else np.asarray(X, dtype=float)
    _check_sizes(n1, n2)
    n1, n2 = int(n1), int(n2)
    p = X.shape[0]
    eps = noise.sample(n1 + n2, rng.child(2))
    y_trace = np.full(n1, gamma * float(np.trace(X))) + eps[:n1]
    op = probe_operator(p, n2, gamma, rng.child(1))
    y_frob = op.matvec(X.ravel()) + eps[n1:]
    return MatrixSketch(y_trace, y_frob, gamma, p, noise.sigma0 if noise.active else 0.0, rng, op)


def estimate_effective_rank(sk: MatrixSketch, alpha: float = 0.05,
                            varrho: Optional[float] = None) -> RankEstimate:
    """Estimate ``r(X) = tr(X)**2 / ||X||_F**2`` with a confidence interval.

    The interval ``[r_hat ((1 - zeta)/(1 + varrho))**2, r_hat ((1 + zeta)/(1 - varrho))**2]``
    has asymptotic coverage ``1 - 2 alpha``, where
    ``zeta = z_{1-alpha} / sqrt(n) + varrho`` and ``varrho`` bounds
    ``sigma0 / (gamma ||X||_F)``.
    """
    if varrho is None:
        if sk.sigma0 > 0:
            raise ParameterError("varrho must be supplied for a noisy sketch")
        varrho = 0.0
    varrho = float(varrho)
    if not 0.0 < alpha < 0.5:
        raise ParameterError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not varrho >= 0:
        raise ParameterError(f"varrho must be non-negative, got {varrho}")
    unbalanced = sk.n1 != sk.n2
    n = 2 * min(sk.n1, sk.n2)
    if unbalanced:
        warnings.warn(f"n1={sk.n1} != n2={sk.n2}; interval computed with n={n}", stacklevel=2)
    zeta = normal_quantile(1.0 - alpha) / math.sqrt(n) + varrho
    if zeta >= 1.0:
        param = "varrho" if varrho >= 1.0 else "n"
        raise HypothesisViolationError(
            f"zeta_n = {zeta:.4g} >= 1 (varrho={varrho:g}, n={n}); interval undefined",
            parameter=param, value=varrho if param == "varrho" else n)

    t1 = float(np.mean(sk.y_trace)) / sk.gamma
    t2 = float(np.sqrt(np.mean(sk.y_frob ** 2))) / sk.gamma
    if t2 == 0.0:
        raise DegenerateSketchError("Frobenius sketch statistic is zero")
    r_raw = (t1 / t2) ** 2
    low = r_raw * ((1 - zeta) / (1 + varrho)) ** 2
    high = r_raw * ((1 + zeta) / (1 - varrho)) ** 2 if varrho < 1 else math.inf
    p = int(sk.p)

    def clip(v):
        return float(min(max(v, 1.0), p))

    return RankEstimate(t1, t2, clip(r_raw), r_raw, clip(low), clip(high), float(alpha), varrho,
                        n, zeta, p, unbalanced)
