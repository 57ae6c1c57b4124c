"""Two-ensemble sketch of a vector and the sparsity estimate built from it.

The first ``n1`` measurements use Cauchy rows and estimate ``||x||_1`` by a
scaled median; the next ``n2`` use Gaussian rows and estimate ``||x||_2`` by a
root mean square.  Their squared ratio estimates ``s(x)``, and a
dimension-free confidence interval follows from the asymptotic normality of
both statistics plus the bounded-noise perturbation ``rho``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional

import numpy as np

from .errors import DegenerateSketchError, DomainError, HypothesisViolationError, ParameterError
from .operators import StreamedOperator
from .sparsity_measures import as_signal
from .stable_sampling import RngStream, StableKind

__all__ = [
    "NoiseSpec",
    "VectorSketch",
    "SketchEstimate",
    "acquire_sketch",
    "acquire_sketch_by_law",
    "estimate_l1",
    "estimate_l2",
    "estimate_sparsity",
    "ci_half_widths",
    "theoretical_relative_error",
    "normal_cdf",
    "normal_quantile",
]


# --- normal quantile -------------------------------------------------------

_STD_NORMAL = NormalDist()


def normal_cdf(z: float) -> float:
    return _STD_NORMAL.cdf(z)


def normal_quantile(u: float) -> float:
    """Standard normal quantile ``z`` with ``Phi(z) = u``."""
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ParameterError(f"u must lie in (0, 1), got {u}")
    return _STD_NORMAL.inv_cdf(u)


# --- data types ------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Independent bounded measurement noise, ``|eps_i| <= sigma0``.

    ``law`` is ``"uniform"`` (Uniform[-sigma0, sigma0]) or ``"none"``.
    """

    sigma0: float = 0.0
    law: str = "uniform"

    def __post_init__(self):
        if not self.sigma0 >= 0:
            raise ParameterError(f"sigma0 must be non-negative, got {self.sigma0}")
        if self.law not in ("uniform", "none"):
            raise ParameterError(f"unknown noise law {self.law!r}")

    @property
    def active(self) -> bool:
        return self.law != "none" and self.sigma0 > 0

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        if not self.active:
            return np.zeros(n)
        return rng.generator().uniform(-self.sigma0, self.sigma0, size=n)


NOISELESS = NoiseSpec(0.0, "none")


@dataclass(eq=False)
class VectorSketch:
    """Measurements of one signal: Cauchy block then Gaussian block.

    ``gauss_operator`` (when known) regenerates the Gaussian rows for reuse
    in recovery.
    """

    y_cauchy: np.ndarray
    y_gauss: np.ndarray
    gamma: float
    p: int
    sigma0: float = 0.0
    rng: Optional[RngStream] = None
    gauss_operator: Optional[StreamedOperator] = field(default=None, repr=False)

    def __post_init__(self):
        self.y_cauchy = np.atleast_1d(np.asarray(self.y_cauchy, dtype=float))
        self.y_gauss = np.atleast_1d(np.asarray(self.y_gauss, dtype=float))
        if self.y_cauchy.size < 1 or self.y_gauss.size < 1:
            raise ParameterError("both measurement blocks must be non-empty")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")

    @property
    def n1(self) -> int:
        return self.y_cauchy.size

    @property
    def n2(self) -> int:
        return self.y_gauss.size


@dataclass(frozen=True)
class SketchEstimate:
    """Sparsity estimate with its confidence interval.

    ``s_hat`` and the interval endpoints are clipped to ``[1, p]``;
    ``s_hat_raw`` keeps the unclipped ratio.  ``unbalanced`` is set when
    ``n1 != n2``, in which case the interval uses ``n = 2 min(n1, n2)``.
    """

    t1_hat: float
    t2_hat: float
    s_hat: float
    s_hat_raw: float
    ci_low: float
    ci_high: float
    alpha: float
    rho: float
    n: int
    delta: float
    eta: float
    p: int
    unbalanced: bool = False

    def covers(self, s: float) -> bool:
        return self.ci_low <= s <= self.ci_high


# --- acquisition -----------------------------------------------------------

def _check_sizes(n1, n2):
    for name, v in (("n1", n1), ("n2", n2)):
        if int(v) != v or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v}")


def acquire_sketch(x, n1: int, n2: int, gamma: float = 1.0, noise: NoiseSpec = NOISELESS,
                   rng: RngStream = RngStream(0)) -> VectorSketch:
    """Measure ``x`` with ``n1`` Cauchy rows and ``n2`` Gaussian rows.

    Sub-streams of ``rng``: ``child(0)`` Cauchy rows, ``child(1)`` Gaussian
    rows, ``child(2)`` noise.
    """
    x = as_signal(x)
    if not np.any(x):
        raise DomainError("signal must be non-zero")
    _check_sizes(n1, n2)
    p = x.size
    cauchy = StreamedOperator(StableKind.CAUCHY, int(n1), p, gamma, rng.child(0))
    gauss = StreamedOperator(StableKind.GAUSSIAN, int(n2), p, gamma, rng.child(1))
    eps = noise.sample(int(n1) + int(n2), rng.child(2))
    y1 = cauchy.matvec(x) + eps[: int(n1)]
    y2 = gauss.matvec(x) + eps[int(n1):]
    return VectorSketch(y1, y2, gamma, p, noise.sigma0 if noise.active else 0.0, rng, gauss)


def acquire_sketch_by_law(x, n1: int, n2: int, gamma: float = 1.0, noise: NoiseSpec = NOISELESS,
                          rng: RngStream = RngStream(0)) -> VectorSketch:
    """Simulate a sketch by sampling the projections' exact law directly.

    ``<a, x>`` with i.i.d. ``S_q(gamma)`` rows is itself ``S_q`` with scale
    ``gamma ||x||_q``, so the sketch can be drawn in O(n) instead of O(np).
    This needs ``x`` itself and therefore only serves Monte Carlo studies;
    no measurement rows exist for later reuse.
    """
    x = as_signal(x)
    if not np.any(x):
        raise DomainError("signal must be non-zero")
    _check_sizes(n1, n2)
    n1, n2 = int(n1), int(n2)
    l1 = float(np.abs(x).sum())
    l2 = float(np.linalg.norm(x))
    u = rng.child(0).generator().random(n1)
    y1 = gamma * l1 * np.tan(np.pi * (u - 0.5))
    y2 = gamma * l2 * rng.child(1).generator().standard_normal(n2)
    eps = noise.sample(n1 + n2, rng.child(2))
    return VectorSketch(y1 + eps[:n1], y2 + eps[n1:], gamma, x.size,
                        noise.sigma0 if noise.active else 0.0, rng, None)


# --- estimators ------------------------------------------------------------

def estimate_l1(y_cauchy, gamma: float = 1.0) -> float:
    """``median(|y_i|) / gamma``, the Cauchy scale estimate of ``||x||_1``."""
    y = np.asarray(y_cauchy, dtype=float).ravel()
    if y.size == 0:
        raise ParameterError("need at least one Cauchy measurement")
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return float(np.median(np.abs(y))) / gamma


def estimate_l2(y_gauss, gamma: float = 1.0) -> float:
    """``sqrt(sum y_i**2 / (gamma**2 n2))``, the Gaussian estimate of ``||x||_2``."""
    y = np.asarray(y_gauss, dtype=float).ravel()
    if y.size == 0:
        raise ParameterError("need at least one Gaussian measurement")
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return float(np.sqrt(np.mean(y * y))) / gamma


def ci_half_widths(alpha: float, rho: float, n: int):
    """Return ``(delta_n, eta_n)`` for level ``alpha``, noise ratio ``rho``, total ``n``.

    ``delta_n = pi z / sqrt(2n) + rho`` governs the median statistic and
    ``eta_n = z / sqrt(n) + rho`` the root-mean-square statistic, with
    ``z`` the ``1 - alpha`` normal quantile.
    """
    if not 0.0 < alpha < 0.5:
        raise ParameterError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not rho >= 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    z = normal_quantile(1.0 - alpha)
    delta = math.pi * z / math.sqrt(2.0 * n) + rho
    eta = z / math.sqrt(n) + rho
    return delta, eta


def theoretical_relative_error(alpha: float, rho: float, n: int) -> float:
    """Largest ``|s_hat/s - 1|`` allowed by the interval at level ``alpha``."""
    delta, eta = ci_half_widths(alpha, rho, n)
    if eta >= 1:
        return math.inf
    upper = ((1 + delta) / (1 - eta)) ** 2 - 1
    lower = 1 - ((1 - delta) / (1 + eta)) ** 2 if delta < 1 else 1.0
    return max(upper, lower)


def estimate_sparsity(sk: VectorSketch, alpha: float = 0.05,
                      rho: Optional[float] = None) -> SketchEstimate:
    """Estimate ``s(x)`` and a confidence interval from a sketch.

    Args:
        sk: the measurements.
        alpha: level in (0, 1/2); asymptotic coverage is ``(1 - 2 alpha)**2``.
        rho: bound on ``sigma0 / (gamma ||x||_2)``.  May be omitted only for
            noiseless sketches.

    Raises:
        DegenerateSketchError: the Gaussian statistic is zero.
        HypothesisViolationError: ``eta_n >= 1``.
    """
    if rho is None:
        if sk.sigma0 > 0:
            raise ParameterError("rho must be supplied for a noisy sketch")
        rho = 0.0
    rho = float(rho)
    unbalanced = sk.n1 != sk.n2
    n = 2 * min(sk.n1, sk.n2)
    if unbalanced:
        warnings.warn(f"n1={sk.n1} != n2={sk.n2}; interval computed with n={n}", stacklevel=2)
    delta, eta = ci_half_widths(alpha, rho, n)
    if eta >= 1.0:
        param = "rho" if rho >= 1.0 else "n"
        raise HypothesisViolationError(
            f"eta_n = {eta:.4g} >= 1 (rho={rho:g}, n={n}); interval undefined",
            parameter=param, value=rho if param == "rho" else n)

    t1 = estimate_l1(sk.y_cauchy, sk.gamma)
    t2 = estimate_l2(sk.y_gauss, sk.gamma)
    if t2 == 0.0:
        raise DegenerateSketchError("Gaussian sketch statistic is zero")
    s_raw = (t1 / t2) ** 2
    low = s_raw * ((1 - eta) / (1 + delta)) ** 2
    high = s_raw * ((1 + eta) / (1 - delta)) ** 2 if delta < 1 else math.inf
    p = int(sk.p)

    def clip(v):
        return float(min(max(v, 1.0), p))

    return SketchEstimate(t1, t2, clip(s_raw), s_raw, clip(low), clip(high), float(alpha),
                          rho, n, delta, eta, p, unbalanced)
