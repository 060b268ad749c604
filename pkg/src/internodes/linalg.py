"""Dense and sparse factorizations plus two Krylov solvers for black-box operators.

The Krylov methods are written out here (rather than taken from
:mod:`scipy.sparse.linalg`) because the interface solver needs the
per-iteration residual history, a true-residual stopping test and a
breakdown signal that is distinct from iteration exhaustion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "NotSPDError",
    "KrylovBreakdown",
    "cholesky",
    "cholesky_solve",
    "LocalSolver",
    "KrylovReport",
    "bicgstab",
    "gmres",
]


class NotSPDError(np.linalg.LinAlgError):
    """The matrix handed to :func:`cholesky` is not symmetric positive definite."""


class KrylovBreakdown(RuntimeError):
    """A Krylov recurrence divided by (numerically) zero."""


def cholesky(A) -> np.ndarray:
    """Lower-triangular ``L`` with ``A = L L^T``.

    Raises
    ------
    NotSPDError
        If ``A`` is not symmetric or a pivot is not positive.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * np.abs(A).max(initial=0.0)):
        raise NotSPDError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(str(exc)) from None


def cholesky_solve(L: np.ndarray, b) -> np.ndarray:
    """Solve ``L L^T x = b`` by two triangular sweeps."""
    y = sla.solve_triangular(L, b, lower=True)
    return sla.solve_triangular(L.T, y, lower=False)


def _is_symmetric(A: sp.spmatrix) -> bool:
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 1.0
    return diff.max() <= 1e-12 * scale if diff.nnz else True


class LocalSolver:
    """Factorization of a sparse patch matrix reused for many right-hand sides.

    Symmetric matrices are factored with a banded Cholesky decomposition in
    their natural (lexicographic) ordering, where tensor-product matrices are
    banded.  Nonsymmetric or indefinite ones fall back to sparse LU.
    """

    def __init__(self, A, symmetric: bool | None = None):
        A = sp.csr_matrix(A)
        self.n = A.shape[0]
        self.kind = "empty" if self.n == 0 else None
        if self.n == 0:
            return
        symmetric = _is_symmetric(A) if symmetric is None else symmetric
        if symmetric:
            coo = A.tocoo()
            bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
            ab = np.zeros((bw + 1, self.n))
            upper = coo.col >= coo.row
            ab[bw + coo.row[upper] - coo.col[upper], coo.col[upper]] = coo.data[upper]
            try:
                self._cb = sla.cholesky_banded(ab, lower=False)
                self.kind = "cholesky"
                return
            except np.linalg.LinAlgError:
                pass
        self._lu = spla.splu(A.tocsc())
        self.kind = "lu"

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.kind == "empty":
            return np.zeros_like(b)
        if self.kind == "cholesky":
            return sla.cho_solve_banded((self._cb, False), b)
        return self._lu.solve(b)


@dataclass
class KrylovReport:
    """Outcome of an iterative solve.

    Attributes
    ----------
    iterations : int
    residual : float
        Final relative true residual ``||b - A x|| / ||b||``.
    converged : bool
    breakdown : bool
    history : list of float
        Relative residual norms, one per iteration (index 0 is the start).
    method : str
    """

    iterations: int = 0
    residual: float = np.inf
    converged: bool = False
    breakdown: bool = False
    history: list = field(default_factory=list)
    method: str = ""


def _identity(x):
    return x


def bicgstab(apply_op: Callable, b, apply_precond: Callable | None = None, tol: float = 1e-10,
             max_it: int = 500, x0=None):
    """Right-preconditioned Bi-CGStab.

    Stops when ``||b - A x|| <= tol ||b||``; the recursive residual is checked
    every half step and confirmed against the true residual.

    Returns
    -------
    x : ndarray
    report : KrylovReport
    """
    M = apply_precond or _identity
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    rep = KrylovReport(method="bicgstab")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        rep.converged, rep.residual, rep.history = True, 0.0, [0.0]
        return np.zeros_like(b), rep
    r = b - apply_op(x)
    rep.history.append(np.linalg.norm(r) / bnorm)
    if rep.history[-1] <= tol:
        rep.converged, rep.residual = True, rep.history[-1]
        return x, rep
    target = tol * bnorm
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = np.finfo(float).eps ** 2
    restarts = 0
    it = 0
    while it < max_it:
        it += 1
        rho_new = rhat @ r
        if abs(rho_new) <= tiny * (rhat @ rhat) * 1e-10 or not np.isfinite(rho_new):
            rep.breakdown = True
            break
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = M(p)
        v = apply_op(phat)
        denom = rhat @ v
        if denom == 0.0 or not np.isfinite(denom):
            rep.breakdown = True
            break
        alpha = rho_new / denom
        s = r - alpha * v
        x = x + alpha * phat
        snorm = np.linalg.norm(s)
        if snorm <= target:
            r = s
            rep.history.append(snorm / bnorm)
        else:
            shat = M(s)
            t = apply_op(shat)
            tt = t @ t
            if tt == 0.0:
                rep.breakdown = True
                break
            omega = (t @ s) / tt
            x = x + omega * shat
            r = s - omega * t
            rep.history.append(np.linalg.norm(r) / bnorm)
            if omega == 0.0:
                rep.breakdown = True
                break
        rho = rho_new
        if rep.history[-1] * bnorm <= target:
            true_r = b - apply_op(x)
            if np.linalg.norm(true_r) <= target:
                break
            # recursive residual drifted: restart from the true one
            restarts += 1
            r = true_r
            rhat = r.copy()
            rho = alpha = omega = 1.0
            v = np.zeros_like(b)
            p = np.zeros_like(b)
            if restarts > 5:
                break
    rep.iterations = it
    rep.residual = float(np.linalg.norm(b - apply_op(x)) / bnorm)
    rep.converged = rep.residual <= tol
    return x, rep


def gmres(apply_op: Callable, b, apply_precond: Callable | None = None, tol: float = 1e-10,
          max_it: int = 500, restart: int = 30, x0=None):
    """Restarted right-preconditioned GMRES with Givens rotations.

    ``max_it`` counts inner (Arnoldi) iterations across restarts.
    """
    M = apply_precond or _identity
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    rep = KrylovReport(method="gmres")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        rep.converged, rep.residual, rep.history = True, 0.0, [0.0]
        return np.zeros_like(b), rep
    n = b.size
    it = 0
    r = b - apply_op(x)
    beta = np.linalg.norm(r)
    rep.history.append(beta / bnorm)
    while it < max_it and beta > tol * bnorm:
        m = min(restart, max_it - it, n)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            it += 1
            Z[k] = M(V[k])
            w = apply_op(Z[k])
            for j in range(k + 1):  # modified Gram-Schmidt
                H[j, k] = w @ V[j]
                w = w - H[j, k] * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0:
                V[k + 1] = w / H[k + 1, k]
            for j in range(k):
                hj = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = hj
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                rep.breakdown = True
                k_used = k
                break
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            rep.history.append(abs(g[k + 1]) / bnorm)
            if abs(g[k + 1]) <= tol * bnorm:
                break
        if k_used == 0:
            break
        y = sla.solve_triangular(H[:k_used, :k_used], g[:k_used])
        x = x + y @ Z[:k_used]
        r = b - apply_op(x)
        beta = np.linalg.norm(r)
        if rep.breakdown:
            break
    rep.iterations = it
    rep.residual = float(np.linalg.norm(b - apply_op(x)) / bnorm)
    rep.converged = rep.residual <= tol
    return x, rep
