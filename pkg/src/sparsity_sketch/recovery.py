"""Sparsity-adaptive measurement budget and Basis Pursuit reconstruction.

:func:`basis_pursuit` solves ``min ||v||_1 s.t. ||A v - y||_2 <= eps0`` with
ADMM on the splitting ``v = z``, ``A v - y = w``, ``||w|| <= eps0``.  The
``v``-update is an exact solve with ``I + A^T A`` done through the ``n x n``
matrix ``I + A A^T`` (Woodbury), so each iteration costs two products with
``A`` plus one product with a precomputed ``n x n`` inverse.  Convergence is certified by a duality
gap: the dual of Basis Pursuit is

    max  <lambda, y> - eps0 ||lambda||_2   s.t.  ||A^T lambda||_inf <= 1,

and every certificate pairs a feasible primal point with a feasible dual
point, so the reported gap bounds the suboptimality of ``||x_hat||_1``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import BudgetUndefinedError, DomainError, InfeasibleError, ParameterError
from .operators import ExplicitOperator, StackedOperator, StreamedOperator, as_operator
from .sketch_estimation import NoiseSpec, acquire_sketch, estimate_sparsity
from .sparsity_measures import as_signal
from .stable_sampling import RngStream, StableKind

__all__ = [
    "RecoveryResult",
    "adaptive_budget",
    "basis_pursuit",
    "recover_with_estimated_sparsity",
    "MAX_DENSE_BYTES",
]

log = logging.getLogger(__name__)

# Streamed operators are materialized for the solver below this size.
MAX_DENSE_BYTES = 1 << 30

# default penalty is RHO_SCALE / ||x_ln||_inf in row-normalized units; a
# fixed, fairly stiff penalty lets the support fill in quickly so the
# closed-form polish can finish the job
RHO_SCALE = 30.0


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    n_used: int
    bp_iterations: int
    residual_norm: float
    l1_value: float
    eps0: float = 0.0
    converged: bool = True
    gap: float = 0.0
    dual_value: float = float("nan")
    s_hat: float = float("nan")
    n_hat: int = 0
    extra_rows: int = 0
    # descriptors of the row groups used, in stacking order
    operators: list = field(default_factory=list)


def adaptive_budget(s_hat: float, p: int) -> int:
    """``ceil(2 ceil(s_hat) ln(p / ceil(s_hat)))`` measurements for recovery.

    Raises:
        BudgetUndefinedError: if ``ceil(s_hat) >= p``; use ``n = p`` instead.
    """
    if not s_hat >= 1:
        raise ParameterError(f"s_hat must be >= 1, got {s_hat}")
    if int(p) != p or p < 1:
        raise ParameterError(f"p must be a positive integer, got {p}")
    k = math.ceil(s_hat)
    if k >= p:
        raise BudgetUndefinedError(f"ceil(s_hat) = {k} >= p = {p}; budget undefined")
    return int(math.ceil(2 * k * math.log(p / k)))


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _proj_ball(w, r):
    nw = np.linalg.norm(w)
    if nw <= r:
        return w
    return w * (r / nw) if r > 0 else np.zeros_like(w)


class _Gram:
    """Factorizations of ``G = A A^T`` needed by the solver."""

    def __init__(self, G):
        n = G.shape[0]
        self.G = G
        # explicit inverse of I + G: one gemv per iteration instead of two
        # triangular solves plus a product with G
        sh = sla.cho_factor(G + np.eye(n), lower=True, check_finite=False)
        self.shifted_inv = sla.cho_solve(sh, np.eye(n), check_finite=False)
        try:
            self.chol = sla.cho_factor(G, lower=True, check_finite=False)
            # reject numerically singular factors
            d = np.abs(np.diag(self.chol[0]))
            if d.min() <= 1e-7 * d.max():
                raise np.linalg.LinAlgError("ill-conditioned Gram matrix")
            self.pinv = None
        except np.linalg.LinAlgError:
            self.chol = None
            self.pinv = np.linalg.pinv(G, rcond=1e-12, hermitian=True)

    def solve_shifted(self, b):
        return self.shifted_inv @ b

    def solve(self, b):
        if self.chol is not None:
            x = sla.cho_solve(self.chol, b, check_finite=False)
            # one step of refinement
            return x + sla.cho_solve(self.chol, b - self.G @ x, check_finite=False)
        return self.pinv @ b


def _polish(M, ys, eps, support, signs, lam0):
    """Closed-form solve on a fixed support and sign pattern.

    Returns ``(v, lam)`` or ``None``.  For ``eps > 0`` the pair solves the
    KKT system ``A_S^T lam = sign``, ``lam = mu (y - A_S v_S)``,
    ``||A_S v_S - y|| = eps``; for ``eps = 0`` the primal is the exact
    solution of ``A_S v_S = y`` and the dual is ``lam0`` corrected onto
    ``A_S^T lam = sign``.  Optimality is left to the caller's certificate.
    """
    n, p = M.shape
    k = support.size
    if k == 0 or k > n:
        return None
    AS = M[:, support]
    H = AS.T @ AS
    try:
        Hf = sla.cho_factor(H, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    Hs = sla.cho_solve(Hf, signs, check_finite=False)
    Aty = AS.T @ ys
    v_ls = sla.cho_solve(Hf, Aty, check_finite=False)
    r_ls = AS @ v_ls - ys
    a = float(r_ls @ r_ls)
    if eps > 0:
        b = float(signs @ Hs)
        if a >= eps * eps or b <= 0:
            return None
        mu = math.sqrt(b / (eps * eps - a))
        vS = v_ls - Hs / mu
        lam = mu * (ys - AS @ vS)
    else:
        if a > 1e-20 * max(float(ys @ ys), 1e-300):
            return None
        vS = v_ls
        lam = lam0 + AS @ sla.cho_solve(Hf, signs - AS.T @ lam0, check_finite=False)
    v = np.zeros(p)
    v[support] = vS
    return v, lam


class _Dense:
    def __init__(self, M):
        self.M = M

    def matvec(self, v):
        return self.M @ v

    def rmatvec(self, w):
        return self.M.T @ w


def basis_pursuit(A, y, eps0: float = 0.0, tol: float = 1e-6, max_iter: int = 5000,
                  rho: Optional[float] = None, check_every: int = 10,
                  max_dense_bytes: int = MAX_DENSE_BYTES) -> RecoveryResult:
    """Solve ``min ||v||_1`` subject to ``||A v - y||_2 <= eps0``.

    Args:
        A: array or operator with ``matvec``/``rmatvec``/``gram``.
        y: measurements, length ``n``.
        eps0: radius of the residual ball.
        tol: target relative duality gap.
        max_iter: iteration cap; on exhaustion the best certified point is
            returned with ``converged=False``.
        rho: initial ADMM penalty (chosen from the data when omitted).

    Raises:
        InfeasibleError: when no ``v`` satisfies the constraint.
    """
    op = as_operator(A)
    y = np.asarray(y, dtype=float).ravel()
    n, p = op.shape
    if y.size != n:
        raise ParameterError(f"y has length {y.size}, operator has {n} rows")
    if not eps0 >= 0:
        raise ParameterError(f"eps0 must be non-negative, got {eps0}")
    if not tol > 0 or max_iter < 1:
        raise ParameterError("tol must be positive and max_iter >= 1")

    if isinstance(op, ExplicitOperator) or op.nbytes_dense <= max_dense_bytes:
        M = op.to_dense()
        G = M @ M.T
        lin = _Dense(M)
    else:
        M = None
        G = op.gram()
        lin = op

    # rescale rows to unit RMS norm so both ADMM constraints are balanced
    scale = math.sqrt(max(float(np.trace(G)) / n, 1e-300))
    G = G / scale ** 2
    if M is not None:
        if isinstance(op, ExplicitOperator):
            M = M / scale
        else:
            M *= 1.0 / scale
    ys = y / scale
    eps = eps0 / scale

    if M is not None:
        lin = _Dense(M)
        scale_ops = 1.0
    else:
        scale_ops = scale

    def Av(v):
        return lin.matvec(v) / scale_ops

    def ATw(w):
        return lin.rmatvec(w) / scale_ops

    gram = _Gram(G)
    y_norm = float(np.linalg.norm(ys))

    # minimum-norm point closest to feasibility
    x_ln = ATw(gram.solve(ys))
    r_ln = float(np.linalg.norm(Av(x_ln) - ys))
    if r_ln > eps + 1e-7 * max(y_norm, 1e-300):
        raise InfeasibleError(
            f"no feasible point: least-squares residual {r_ln * scale:.3e} > eps0 = {eps0:.3e}")
    if y_norm <= eps:
        return RecoveryResult(np.zeros(p), n, 0, float(np.linalg.norm(y)), 0.0, eps0, True, 0.0, 0.0)

    # feasible target radius sits just inside the ball so rounding stays inside
    eps_target = eps * (1 - 1e-9)

    def make_feasible(v, Avv=None):
        Avv = Av(v) if Avv is None else Avv
        r = Avv - ys
        nr = float(np.linalg.norm(r))
        if nr <= eps_target:
            return v, nr
        target = r * (eps_target / nr) if eps_target > 0 else np.zeros_like(r)
        v = v + ATw(gram.solve(target - r))
        return v, float(np.linalg.norm(Av(v) - ys))

    def dual_value(lam):
        g = np.abs(ATw(lam)).max()
        if g > 1:
            lam = lam / g
        return float(ys @ lam - eps * np.linalg.norm(lam))

    if rho is None:
        rho = RHO_SCALE / max(float(np.abs(x_ln).max()), 1e-300)
    z = np.zeros(p)
    w = _proj_ball(-ys, eps)
    u1 = np.zeros(p)
    u2 = np.zeros(n)
    relax = 1.6

    best = None  # (l1, gap, x, residual, dual)
    last_support = None
    polished = set()
    it = 0
    for it in range(1, max_iter + 1):
        d = z - u1
        c = w + ys - u2
        # (I + G)^{-1} (A d + G c) = (I + G)^{-1} (A d - c) + c
        h = gram.solve_shifted(Av(d) - c) + c
        v = d + ATw(c - h)
        Av_v = h
        v_r = relax * v + (1 - relax) * z
        Av_r = relax * Av_v + (1 - relax) * (w + ys)
        z_old, w_old = z, w
        z = _soft(v_r + u1, 1.0 / rho)
        w = _proj_ball(Av_r - ys + u2, eps)
        u1 = u1 + v_r - z
        u2 = u2 + Av_r - ys - w

        if it % check_every:
            continue
        r_pri = math.sqrt(float(np.sum((v - z) ** 2) + np.sum((Av_v - ys - w) ** 2)))
        r_dual = rho * math.sqrt(float(np.sum((z - z_old) ** 2) + np.sum((w - w_old) ** 2)))

        x_c, res = make_feasible(z)
        l1 = float(np.abs(x_c).sum())
        lam = -rho * u2
        dv = dual_value(lam)
        gap = l1 - dv
        if best is None or gap < best[1]:
            best = (l1, gap, x_c, res, dv)
        if gap <= tol * max(l1, 1e-300):
            break

        support = np.flatnonzero(z)
        key = (support.tobytes(), np.sign(z[support]).tobytes())
        if M is not None and key == last_support and key not in polished:
            polished.add(key)
            pol = _polish(M, ys, eps, support, np.sign(z[support]), lam)
            if pol is not None:
                x_p, res_p = make_feasible(pol[0])
                l1_p = float(np.abs(x_p).sum())
                dv_p = max(dual_value(pol[1]), dv)
                if l1_p - dv_p < best[1]:
                    best = (l1_p, l1_p - dv_p, x_p, res_p, dv_p)
                if best[1] <= tol * max(best[0], 1e-300):
                    break
        last_support = key

        log.debug("it=%d l1=%.6g dual=%.6g rpri=%.3g rdual=%.3g rho=%.3g supp=%d",
                  it, l1, dv, r_pri, r_dual, rho, np.count_nonzero(z))

    if best is None:
        x_c, res = make_feasible(z)
        l1 = float(np.abs(x_c).sum())
        dv = dual_value(-rho * u2)
        best = (l1, l1 - dv, x_c, res, dv)
    l1, gap, x_hat, res, dv = best
    converged = gap <= tol * max(l1, 1e-300)
    if not converged:
        warnings.warn(f"basis_pursuit stopped after {it} iterations with relative gap "
                      f"{gap / max(l1, 1e-300):.2e} > tol={tol:g}", RuntimeWarning, stacklevel=2)
    residual = float(np.linalg.norm(op.matvec(x_hat) - y))
    return RecoveryResult(x_hat, n, it, residual, l1, eps0, converged, gap, dv)


def recover_with_estimated_sparsity(x, gamma: float = 1.0, sigma0: float = 0.0,
                                    rng: RngStream = RngStream(0), n1: int = 500, n2: int = 500,
                                    alpha: float = 0.05, tol: float = 1e-6, max_iter: int = 5000,
                                    max_dense_bytes: int = MAX_DENSE_BYTES) -> RecoveryResult:
    """Estimate ``s(x)``, size the measurement budget, and reconstruct ``x``.

    The preliminary sketch uses ``n1`` Cauchy and ``n2`` Gaussian rows.  With
    ``n_hat = adaptive_budget(s_hat, p)``: if ``n_hat <= n2`` the ``n2``
    Gaussian measurements are reused as they are; otherwise ``n_hat - n2``
    fresh Gaussian rows are appended.  Basis Pursuit then runs with
    ``eps0 = sigma0 sqrt(n_used)``.

    ``x`` is the ground-truth signal being measured (this is a simulation).
    Sub-streams of ``rng``: ``child(0)`` sketch, ``child(1)`` extra rows,
    ``child(2)`` extra-row noise.
    """
    x = as_signal(x)
    if not np.any(x):
        raise DomainError("signal must be non-zero")
    p = x.size
    noise = NoiseSpec(sigma0, "uniform" if sigma0 > 0 else "none")
    sk = acquire_sketch(x, n1, n2, gamma, noise, rng.child(0))
    rho = sigma0 / (gamma * float(np.linalg.norm(x)))
    est = estimate_sparsity(sk, alpha, rho) if rho < 1 - 1e-12 else None
    s_hat = est.s_hat if est is not None else (
        (np.median(np.abs(sk.y_cauchy)) / np.sqrt(np.mean(sk.y_gauss ** 2))) ** 2)
    s_hat = float(min(max(s_hat, 1.0), p))
    try:
        n_hat = adaptive_budget(s_hat, p)
    except BudgetUndefinedError:
        n_hat = p

    op = sk.gauss_operator
    y = sk.y_gauss
    extra = 0
    if n_hat > n2:
        extra = n_hat - n2
        more = StreamedOperator(StableKind.GAUSSIAN, extra, p, gamma, rng.child(1))
        y_more = more.matvec(x) + noise.sample(extra, rng.child(2))
        op = StackedOperator([op, more])
        y = np.concatenate([y, y_more])
    n_used = op.shape[0]
    eps0 = sigma0 * math.sqrt(n_used)
    res = basis_pursuit(op, y, eps0, tol=tol, max_iter=max_iter, max_dense_bytes=max_dense_bytes)
    res.n_used = n_used
    res.s_hat = s_hat
    res.n_hat = n_hat
    res.extra_rows = extra
    res.operators = [part.descriptor() for part in (op.parts if extra else [op])]
    return res
