"""Why deterministic measurement designs cannot estimate sparsity.

For any fixed ``A`` with a non-trivial null space, a dense vector ``x_tilde``
can be added to the null-space coset of a 1-sparse ``x`` without changing
``A x``.  No estimator that sees only ``A x`` can tell the two apart, so its
worst-case relative error is bounded below by :func:`minimax_lower_bound`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConstructionFailedError, DomainError, NoNullSpaceError, ParameterError
from .sparsity_measures import as_signal, numerical_sparsity
from .stable_sampling import RngStream

__all__ = [
    "AdversarialPair",
    "null_space_basis",
    "lemma1_bound",
    "dense_null_perturbation",
    "minimax_lower_bound",
    "RANK_RTOL",
]

# singular values below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class AdversarialPair:
    """Two signals with identical measurements but very different sparsity."""

    x_base: np.ndarray
    x_tilde: np.ndarray
    attained_s: float
    bound: float
    retries: int


def _dense_matrix(A) -> np.ndarray:
    if hasattr(A, "matvec") and not hasattr(A, "matrix"):
        raise ParameterError("an explicit matrix is required; streamed operators have no global null space")
    A = np.asarray(getattr(A, "matrix", A), dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ParameterError(f"expected a non-empty 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def null_space_basis(A) -> np.ndarray:
    """Orthonormal basis (``p x (p - r)``) for the null space of ``A``.

    The numerical rank ``r`` counts singular values above ``1e-10 * sigma_max``.

    Raises:
        NoNullSpaceError: if ``A`` has full column rank.
    """
    A = _dense_matrix(A)
    B = sla.null_space(A, rcond=RANK_RTOL)
    if B.shape[1] == 0:
        raise NoNullSpaceError(f"matrix of shape {A.shape} has full column rank")
    return B


def lemma1_bound(p: int, n: int) -> float:
    """Guaranteed sparsity ``(p - n) / (1 + 2 sqrt(2 ln 2p))**2`` of the dense perturbation."""
    if int(p) != p or int(n) != n or n < 0 or p <= n:
        raise ParameterError(f"need integers p > n >= 0, got p={p}, n={n}")
    return (p - n) / (1.0 + 2.0 * math.sqrt(2.0 * math.log(2.0 * p))) ** 2


def minimax_lower_bound(p: int, n: int) -> float:
    """Lower bound on the worst-case relative error of any estimator of ``s(x)``
    that uses ``n`` deterministic linear measurements in dimension ``p``.

    ``max(0, (1 - (n + 1)/p) / (2 (1 + 2 sqrt(2 ln 2p))**2))``.
    """
    if int(p) != p or int(n) != n or p < 1 or n < 0:
        raise ParameterError(f"need integers p >= 1, n >= 0, got p={p}, n={n}")
    c = (1.0 + 2.0 * math.sqrt(2.0 * math.log(2.0 * p))) ** 2
    return max(0.0, (1.0 - (n + 1) / p) / (2.0 * c))


def dense_null_perturbation(A, x, rng: RngStream = RngStream(0),
                            max_retries: int = 1000) -> AdversarialPair:
    """Build ``x_tilde = x + ||x||_inf B z`` with ``A x_tilde = A x`` and large ``s``.

    ``B`` spans the null space of ``A`` and ``z`` is standard normal.  Draws
    are repeated until ``s(x_tilde) >= lemma1_bound(p, n)``, where ``n`` is
    the number of rows of ``A``.

    Raises:
        ConstructionFailedError: after ``max_retries`` unsuccessful draws;
            carries the best ``s(x_tilde)`` seen.
    """
    A = _dense_matrix(A)
    x = as_signal(x)
    n, p = A.shape
    if x.size != p:
        raise ParameterError(f"x has length {x.size}, A has {p} columns")
    if not np.any(x):
        raise DomainError("signal must be non-zero")
    if max_retries < 1:
        raise ParameterError("max_retries must be at least 1")
    B = null_space_basis(A)
    bound = lemma1_bound(p, n) if p > n else 0.0
    amp = float(np.abs(x).max())
    gen = rng.generator()
    best = -math.inf
    for k in range(1, int(max_retries) + 1):
        z = gen.standard_normal(B.shape[1])
        x_tilde = x + amp * (B @ z)
        if not np.any(x_tilde):
            continue
        s = numerical_sparsity(x_tilde)
        best = max(best, s)
        if s >= bound:
            return AdversarialPair(x.copy(), x_tilde, s, bound, k)
    raise ConstructionFailedError(
        f"no draw reached s >= {bound:.4g} in {max_retries} tries (best {best:.4g})",
        best_s=best, retries=int(max_retries))
