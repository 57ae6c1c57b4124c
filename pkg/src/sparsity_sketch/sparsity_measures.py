"""Exact sparsity and effective-rank functionals, and best T-term approximation.

These are the oracle-side quantities that the sketches estimate:

* numerical sparsity ``s(x) = ||x||_1**2 / ||x||_2**2``, with
  ``1 <= s(x) <= ||x||_0 <= p``;
* effective rank ``r(X) = tr(X)**2 / ||X||_F**2`` for PSD ``X``.

Logarithms are natural throughout.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "as_signal",
    "numerical_sparsity",
    "effective_rank",
    "check_psd",
    "best_t_term",
    "t_term_relative_error",
    "prop1_necessary_T",
    "prop1_sufficient_T",
]


def as_signal(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError(f"signal must be a non-empty 1-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("signal has non-finite entries")
    return x


def _nonzero_signal(x) -> np.ndarray:
    x = as_signal(x)
    if not np.any(x):
        raise DomainError("signal must be non-zero")
    return x


def numerical_sparsity(x) -> float:
    """Return ``||x||_1**2 / ||x||_2**2``.

    Entries are divided by ``max|x_i|`` first so that very large or tiny
    signals neither overflow nor underflow.  The result is clipped to
    ``[1, ||x||_0]``, which only absorbs rounding.
    """
    x = _nonzero_signal(x)
    a = np.abs(x)
    a = a / a.max()
    s = float(a.sum() ** 2 / np.dot(a, a))
    return min(max(s, 1.0), float(np.count_nonzero(a)))


def check_psd(X, rtol_sym: float = 1e-12, rtol_eig: float = 1e-10) -> np.ndarray:
    """Validate that ``X`` is a non-zero, numerically symmetric PSD matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.size == 0:
        raise ParameterError(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("matrix has non-finite entries")
    fro = np.linalg.norm(X)
    if fro == 0.0:
        raise DomainError("matrix must be non-zero")
    if np.linalg.norm(X - X.T) > rtol_sym * fro:
        raise DomainError("matrix is not symmetric")
    lam_min = np.linalg.eigvalsh(0.5 * (X + X.T))[0]
    if lam_min < -rtol_eig * fro:
        raise DomainError(f"matrix is not PSD (min eigenvalue {lam_min:.3e})")
    return X


def effective_rank(X, validate: bool = True) -> float:
    """Return ``tr(X)**2 / ||X||_F**2`` for a non-zero PSD matrix."""
    X = check_psd(X) if validate else np.asarray(X, dtype=float)
    fro = np.linalg.norm(X)
    if fro == 0.0:
        raise DomainError("matrix must be non-zero")
    return float((np.trace(X) / fro) ** 2)


def best_t_term(x, T: int) -> np.ndarray:
    """Keep the ``T`` largest-magnitude entries of ``x`` and zero the rest.

    Ties at the threshold magnitude keep the lowest-index coordinates.
    """
    x = as_signal(x)
    p = x.size
    if int(T) != T or not 1 <= T <= p:
        raise ParameterError(f"T must be an integer in [1, {p}], got {T}")
    # stable sort on -|x| orders equal magnitudes by index
    keep = np.argsort(-np.abs(x), kind="stable")[: int(T)]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def _tail_l1(x, T: int) -> float:
    """``||x - x_T||_1`` summed from the smallest magnitudes upward."""
    a = np.sort(np.abs(x))
    return float(np.sum(a[: a.size - T]))


def t_term_relative_error(x, T: int) -> float:
    """Scale-free approximation error ``||x - x_T||_1 / (sqrt(T) ||x||_2)``."""
    x = _nonzero_signal(x)
    best_t_term(x, T)  # range check
    return _tail_l1(x, int(T)) / (math.sqrt(T) * float(np.linalg.norm(x)))


def prop1_necessary_T(x, eps: float) -> float:
    """Lower bound ``s(x) / (1 + eps)**2`` on any T with error at most ``eps``."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    return numerical_sparsity(x) / (1.0 + eps) ** 2


def prop1_sufficient_T(x, c: float = 2.0) -> int:
    """Smallest integer ``T >= c s(x) ln p``, capped at ``p``.

    With ``c = 2`` and ``p >= 100`` the T-term error is at most 1/3.
    """
    x = _nonzero_signal(x)
    if not c > 0:
        raise ParameterError(f"c must be positive, got {c}")
    p = x.size
    return int(min(p, max(1, math.ceil(c * numerical_sparsity(x) * math.log(p)))))
