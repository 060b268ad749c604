"""Univariate B-splines on open knot vectors and tensor-product index arithmetic.

Basis functions are evaluated with the Cox-de Boor triangular scheme, returning
only the ``p + 1`` functions that can be nonzero at a point together with the
index of the first of them.  All indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

__all__ = [
    "KnotVector",
    "TensorBasis",
    "make_open_knot_vector",
    "find_span",
    "eval_basis",
    "eval_basis_derivatives",
    "basis_matrix",
    "greville_abscissae",
    "insert_knot",
    "elevate_degree",
]


@dataclass(frozen=True, eq=False)
class KnotVector:
    """A ``p``-open knot vector on ``[0, 1]``.

    Attributes
    ----------
    knots : ndarray
        Nondecreasing knot values; the first and last ``p + 1`` are 0 and 1.
    degree : int
        Polynomial degree ``p >= 1``.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        knots.setflags(write=False)
        p = int(self.degree)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for its degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-(p + 1):] != 1.0):
            raise ValueError("knot vector must be p-open on [0, 1]")
        _, counts = np.unique(knots[p + 1: -(p + 1)], return_counts=True)
        if counts.size and counts.max() > p:
            raise ValueError("internal knot multiplicity exceeds the degree")

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @cached_property
    def breaks(self) -> np.ndarray:
        """Distinct knot values."""
        return np.unique(self.knots)

    @property
    def n_el(self) -> int:
        return self.breaks.size - 1

    @property
    def mesh_size(self) -> float:
        return float(np.max(np.diff(self.breaks)))

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, n={self.n}, n_el={self.n_el})"

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))


def make_open_knot_vector(p: int, n_el: int) -> KnotVector:
    """Uniform open knot vector with ``n_el`` elements and simple internal knots."""
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if n_el < 1:
        raise ValueError(f"number of elements must be >= 1, got {n_el}")
    inner = [float(Fraction(i, n_el)) for i in range(1, n_el)]
    return KnotVector(np.array([0.0] * (p + 1) + inner + [1.0] * (p + 1)), p)


def find_span(kv: KnotVector, x) -> np.ndarray:
    """Knot span index ``s`` with ``knots[s] <= x < knots[s+1]``; ``x = 1`` maps to the last span."""
    x = np.asarray(x, dtype=float)
    s = np.searchsorted(kv.knots, x, side="right") - 1
    return np.clip(s, kv.degree, kv.n - 1)


def _check_domain(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(~np.isfinite(x)):
        raise ValueError("evaluation points must lie in [0, 1]")
    return x


def _ders_basis(kv: KnotVector, x: np.ndarray, order: int):
    """Vectorised derivative scheme; returns (span, ders[m, order+1, p+1])."""
    p = kv.degree
    U = kv.knots
    m = x.size
    span = find_span(kv, x)
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - U[span + 1 - j]
        right[:, j] = U[span + j] - x
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((m, order + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    top = min(order, p)
    for r in range(p + 1):
        a = np.zeros((2, m, p + 1))
        a[0, :, 0] = 1.0
        s1, s2 = 0, 1
        for k in range(1, top + 1):
            d = np.zeros(m)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, :, 0] = a[s1, :, 0] / ndu[:, pk + 1, rk]
                d = a[s2, :, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, :, j] = (a[s1, :, j] - a[s1, :, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[s2, :, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[s2, :, k] = -a[s1, :, k - 1] / ndu[:, pk + 1, r]
                d = d + a[s2, :, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, top + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return span, ders


def eval_basis(kv: KnotVector, x):
    """Active basis values at ``x``.

    Returns
    -------
    first : int or ndarray
        Index of the first active basis function.
    values : ndarray, shape (p+1,) or (m, p+1)
    """
    scalar = np.ndim(x) == 0
    xs = _check_domain(x)
    span, ders = _ders_basis(kv, xs, 0)
    first, vals = span - kv.degree, ders[:, 0, :]
    if scalar:
        return int(first[0]), vals[0]
    return first, vals


def eval_basis_derivatives(kv: KnotVector, x, order: int = 1):
    """Values and derivatives up to ``order`` (at most 2) of the active functions.

    Returns ``(first, ders)`` with ``ders[..., k, :]`` the k-th derivative.
    """
    if order > 2 or order < 0:
        raise ValueError(f"derivative order must be in [0, 2], got {order}")
    scalar = np.ndim(x) == 0
    xs = _check_domain(x)
    span, ders = _ders_basis(kv, xs, order)
    first = span - kv.degree
    if scalar:
        return int(first[0]), ders[0]
    return first, ders


def basis_matrix(kv: KnotVector, x, order: int = 0) -> np.ndarray:
    """Dense ``(m, n)`` matrix of the ``order``-th derivative of every basis function."""
    xs = _check_domain(x)
    span, ders = _ders_basis(kv, xs, order)
    out = np.zeros((xs.size, kv.n))
    cols = (span - kv.degree)[:, None] + np.arange(kv.degree + 1)
    np.put_along_axis(out, cols, ders[:, order, :], axis=1)
    return out


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Averages of ``p`` consecutive knots, one per basis function."""
    p, U = kv.degree, kv.knots
    g = np.array([U[i + 1: i + p + 1].sum() / p for i in range(kv.n)])
    # exact endpoints; averaging p copies of 1.0 may round
    g[0], g[-1] = 0.0, 1.0
    return g


def insert_knot(kv: KnotVector, coeffs, z: float):
    """Insert ``z`` once (Boehm); ``coeffs`` has shape ``(n, ...)``.

    The refined coefficients represent the same spline on the refined knots.
    """
    if not 0.0 < z < 1.0:
        raise ValueError("inserted knot must lie strictly inside (0, 1)")
    P = np.asarray(coeffs, dtype=float)
    if P.shape[0] != kv.n:
        raise ValueError("coefficient count does not match the knot vector")
    p, U = kv.degree, kv.knots
    if np.count_nonzero(U == z) >= p:
        raise ValueError("insertion would exceed multiplicity p")
    k = int(find_span(kv, z))
    Q = np.empty((P.shape[0] + 1,) + P.shape[1:])
    Q[: k - p + 1] = P[: k - p + 1]
    Q[k + 1:] = P[k:]
    for i in range(k - p + 1, k + 1):
        a = (z - U[i]) / (U[i + p] - U[i])
        Q[i] = a * P[i] + (1.0 - a) * P[i - 1]
    new = KnotVector(np.insert(U, k + 1, z), p)
    return new, Q


def elevate_degree(kv: KnotVector, coeffs):
    """Raise the degree by one, keeping continuity at every knot.

    Every distinct knot gains one in multiplicity.  The elevated space contains
    the original one, so coefficients follow from collocation at its Greville
    abscissae (Schoenberg-Whitney holds for Greville nodes).
    """
    P = np.asarray(coeffs, dtype=float)
    if P.shape[0] != kv.n:
        raise ValueError("coefficient count does not match the knot vector")
    vals, counts = np.unique(kv.knots, return_counts=True)
    new = KnotVector(np.repeat(vals, counts + 1), kv.degree + 1)
    tau = greville_abscissae(new)
    rhs = basis_matrix(kv, tau) @ P.reshape(P.shape[0], -1)
    Q = np.linalg.solve(basis_matrix(new, tau), rhs)
    return new, Q.reshape((new.n,) + P.shape[1:])


@dataclass(frozen=True, eq=False)
class TensorBasis:
    """Tensor product of univariate bases.

    Linear indices run with the first direction fastest:
    ``i = i_1 + n_1 * (i_2 + n_2 * i_3)``.
    """

    kvs: tuple

    def __post_init__(self):
        object.__setattr__(self, "kvs", tuple(self.kvs))
        if not 1 <= len(self.kvs) <= 3:
            raise ValueError("tensor bases support 1 to 3 directions")

    @property
    def dim(self) -> int:
        return len(self.kvs)

    @property
    def shape(self) -> tuple:
        return tuple(kv.n for kv in self.kvs)

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.kvs)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def ravel(self, multi) -> np.ndarray:
        """Multi-index array ``(..., d)`` to linear indices."""
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(multi[..., j] for j in range(self.dim)),
                                    self.shape, order="F")

    def unravel(self, lin) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(lin), self.shape, order="F"), axis=-1)

    def side_indices(self, direction: int, end: int) -> np.ndarray:
        """Linear indices of functions not vanishing on a parametric side, in face order."""
        shape = list(self.shape)
        grids = [np.arange(n) for n in shape]
        grids[direction] = np.array([0 if end == 0 else shape[direction] - 1])
        mesh = np.meshgrid(*grids, indexing="ij")
        multi = np.stack([g.ravel(order="F") for g in mesh], axis=-1)
        return self.ravel(multi)

    def greville(self) -> np.ndarray:
        """Tensor Greville points ``(N, d)`` in linear-index order."""
        g = [greville_abscissae(kv) for kv in self.kvs]
        mesh = np.meshgrid(*g, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=-1)
