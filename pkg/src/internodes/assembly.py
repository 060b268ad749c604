"""Galerkin assembly on a single NURBS patch.

The bilinear form is

    a(u, v) = int nu grad u . grad v + (b . grad u) v + alpha u v

and the load functional collects the source term plus Neumann fluxes.  All
integrals use tensor Gauss-Legendre rules with ``p + 1`` points per knot span
in each direction unless stated otherwise.

Index sets follow the usual substructuring vocabulary: for an interface side
``gamma`` the closure set holds every patch function that does not vanish on
it, the interior set those vanishing on its boundary, and the boundary set is
the difference.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .geometry import (
    GeometryMap,
    InterfaceFace,
    SingularJacobianError,
    extract_face,
    parse_side,
    side_name,
)

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "INTERFACE",
    "gauss_legendre",
    "ProblemSpec",
    "Patch",
    "DofPartition",
    "QuadratureData",
    "volume_quadrature",
    "side_quadrature",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_load",
    "assemble_neumann",
    "side_flux_matrix",
    "side_mass_matrix",
    "interface_mass_matrix",
    "correction_matrix",
    "compute_residuals",
    "dirichlet_coefficients",
    "interpolate_on_side",
]

DIRICHLET, NEUMANN, INTERFACE = "dirichlet", "neumann", "interface"
_TAGS = {"d": DIRICHLET, "dirichlet": DIRICHLET, "n": NEUMANN, "neumann": NEUMANN,
         "i": INTERFACE, "interface": INTERFACE}


def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on ``[-1, 1]``, exact up to degree ``2n - 1``."""
    if not 1 <= int(n) <= 20:
        raise ValueError(f"number of Gauss points must be in [1, 20], got {n}")
    return np.polynomial.legendre.leggauss(int(n))


def _as_field(value, shape=()):
    """Wrap a constant or callable into ``x[m, d] -> values[m, *shape]``."""
    if callable(value):
        def fn(x):
            out = np.asarray(value(x), dtype=float)
            return np.broadcast_to(out, (x.shape[0],) + shape) if out.ndim < 1 + len(shape) else out
        return fn
    const = np.asarray(value, dtype=float)

    def fn(x):
        return np.broadcast_to(const, (x.shape[0],) + shape).astype(float)
    return fn


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of ``-div(nu grad u) + b . grad u + alpha u = f``.

    Every entry is either a constant or a callable of physical points
    ``x[m, d]``.  ``neumann`` is the conormal flux ``nu du/dn`` and receives the
    points and the unit outward normals.
    """

    nu: object = 1.0
    b: object = None
    alpha: object = 0.0
    f: object = 0.0
    g: object = 0.0
    neumann: object = 0.0

    @property
    def has_advection(self) -> bool:
        return self.b is not None

    def nu_at(self, x):
        return _as_field(self.nu)(x)

    def alpha_at(self, x):
        return _as_field(self.alpha)(x)

    def f_at(self, x):
        return _as_field(self.f)(x)

    def g_at(self, x):
        return _as_field(self.g)(x)

    def b_at(self, x):
        return _as_field(self.b, (x.shape[1],))(x)

    def neumann_at(self, x, n):
        if callable(self.neumann):
            return np.asarray(self.neumann(x, n), dtype=float)
        return np.full(x.shape[0], float(self.neumann))


@dataclass(eq=False)
class Patch:
    """A subdomain: geometry map, side tags and PDE data.

    Parameters
    ----------
    geometry : GeometryMap
    tags : mapping side -> 'dirichlet' | 'neumann' | 'interface'
        Every parametric side must be tagged.
    spec : ProblemSpec
    name : str, optional
    """

    geometry: GeometryMap
    tags: Mapping[str, str]
    spec: ProblemSpec = field(default_factory=ProblemSpec)
    name: str = ""

    def __post_init__(self):
        d = self.geometry.dim_param
        if d != self.geometry.dim_phys:
            raise ValueError("patch maps must be square (parametric = physical dimension)")
        tags = {}
        for side, tag in self.tags.items():
            direction, end = parse_side(side)
            if direction >= d:
                raise ValueError(f"side {side!r} does not exist in {d}D")
            key = str(tag).lower()
            if key not in _TAGS:
                raise ValueError(f"unknown boundary tag {tag!r}")
            tags[side_name(direction, end)] = _TAGS[key]
        missing = [side_name(j, e) for j in range(d) for e in (0, 1)
                   if side_name(j, e) not in tags]
        if missing:
            raise ValueError(f"untagged sides: {missing}")
        self.tags = tags

    @property
    def dim(self) -> int:
        return self.geometry.dim_param

    @property
    def n_dofs(self) -> int:
        return self.geometry.basis.size

    @property
    def sides(self) -> list:
        return [side_name(j, e) for j in range(self.dim) for e in (0, 1)]

    def side_dofs(self, side) -> np.ndarray:
        return self.geometry.basis.side_indices(*parse_side(side))

    def face(self, side, patch_id: int = 0, role: str = "") -> InterfaceFace:
        return extract_face(self.geometry, side, patch_id, role)

    @cached_property
    def partition(self) -> "DofPartition":
        return DofPartition.from_patch(self)


@dataclass(frozen=True)
class DofPartition:
    """Index sets of one patch.

    Attributes
    ----------
    interior : functions vanishing on the whole patch boundary
    dirichlet : functions not vanishing on some Dirichlet side
    closure, inner, boundary : per interface side, the closure set, the set
        vanishing on the side boundary, and their difference
    free : unknowns of the local problems (everything that is neither
        Dirichlet nor on an interface side)
    """

    n: int
    interior: np.ndarray
    dirichlet: np.ndarray
    closure: dict
    inner: dict
    boundary: dict
    free: np.ndarray

    @classmethod
    def from_patch(cls, patch: Patch) -> "DofPartition":
        n = patch.n_dofs
        on_boundary = np.zeros(n, dtype=bool)
        dirichlet = np.zeros(n, dtype=bool)
        on_interface = np.zeros(n, dtype=bool)
        closure, inner, bnd = {}, {}, {}
        for side in patch.sides:
            dofs = patch.side_dofs(side)
            on_boundary[dofs] = True
            tag = patch.tags[side]
            if tag == DIRICHLET:
                dirichlet[dofs] = True
            elif tag == INTERFACE:
                on_interface[dofs] = True
                face = patch.face(side)
                closure[side] = dofs
                inner[side] = dofs[~face.boundary]
                bnd[side] = dofs[face.boundary]
        free = ~(dirichlet | on_interface)
        return cls(n, np.flatnonzero(~on_boundary), np.flatnonzero(dirichlet), closure,
                   inner, bnd, np.flatnonzero(free))


class QuadratureData(NamedTuple):
    """Basis data at quadrature points grouped by element.

    ``idx[E, L]``, ``R[E, Q, L]``, ``grad[E, Q, L, d]`` (physical gradients),
    ``x[E, Q, d]``, ``w[E, Q]`` (weights including the measure) and, for
    sides, unit outward normals ``normal[E, Q, d]``.
    """

    idx: np.ndarray
    R: np.ndarray
    grad: np.ndarray
    x: np.ndarray
    w: np.ndarray
    normal: np.ndarray | None


def _element_rule(kv, nq):
    xg, wg = gauss_legendre(nq)
    a, b = kv.breaks[:-1], kv.breaks[1:]
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * xg[None, :]
    wts = 0.5 * (b - a)[:, None] * wg[None, :]
    return pts, wts


def _grid_points(rules):
    """Tensor combination of per-direction (points[ne, nq], weights) rules."""
    d = len(rules)
    ne = [r[0].shape[0] for r in rules]
    nq = [r[0].shape[1] for r in rules]
    shape = tuple(ne) + tuple(nq)
    xi = np.empty(shape + (d,))
    w = np.ones(shape)
    for j, (pts, wts) in enumerate(rules):
        view = [1] * (2 * d)
        view[j], view[d + j] = ne[j], nq[j]
        xi[..., j] = pts.reshape(view)
        w = w * wts.reshape(view)
    E, Q = int(np.prod(ne)), int(np.prod(nq))
    return xi.reshape(E * Q, d), w.reshape(E, Q), E, Q


def _default_nq(geo, extra=0):
    return tuple(p + 1 + extra for p in geo.degrees)


def volume_quadrature(geo: GeometryMap, nq=None) -> QuadratureData:
    """Element-grouped quadrature data over the whole patch."""
    nq = _default_nq(geo) if nq is None else tuple(np.broadcast_to(nq, (geo.dim_param,)))
    rules = [_element_rule(kv, q) for kv, q in zip(geo.kvs, nq)]
    xi, wq, E, Q = _grid_points(rules)
    ev = geo.evaluate(xi)
    det = np.linalg.det(ev.J)
    if np.any(np.abs(det) < 1e-12 * geo.diameter ** geo.dim_param):
        raise SingularJacobianError("singular Jacobian at a quadrature point")
    Jinv = np.linalg.inv(ev.J)
    grad = np.einsum("mba,mlb->mla", Jinv, ev.dR)
    L = ev.idx.shape[1]
    d = geo.dim_param
    return QuadratureData(ev.idx.reshape(E, Q, L)[:, 0, :], ev.R.reshape(E, Q, L),
                          grad.reshape(E, Q, L, d), ev.x.reshape(E, Q, d),
                          wq * np.abs(det).reshape(E, Q), None)


def side_quadrature(geo: GeometryMap, side, nq=None) -> QuadratureData:
    """Quadrature on a parametric side using the volume basis (so traces are exact)."""
    direction, end = parse_side(side)
    nq = _default_nq(geo) if nq is None else tuple(np.broadcast_to(nq, (geo.dim_param,)))
    rules = []
    for j, (kv, q) in enumerate(zip(geo.kvs, nq)):
        if j == direction:
            rules.append((np.array([[float(end)]]), np.array([[1.0]])))
        else:
            rules.append(_element_rule(kv, q))
    xi, wq, E, Q = _grid_points(rules)
    ev = geo.evaluate(xi)
    det = np.linalg.det(ev.J)
    Jinv = np.linalg.inv(ev.J)
    grad = np.einsum("mba,mlb->mla", Jinv, ev.dR)
    # Nanson: n dGamma = det(J) J^{-T} e_dir dxi_face (up to orientation)
    cof = Jinv[:, direction, :]
    ncof = np.linalg.norm(cof, axis=1)
    # grad(xi_dir) points towards increasing xi_dir whatever the orientation
    normal = (cof / ncof[:, None]) * (1.0 if end == 1 else -1.0)
    L = ev.idx.shape[1]
    d = geo.dim_param
    return QuadratureData(ev.idx.reshape(E, Q, L)[:, 0, :], ev.R.reshape(E, Q, L),
                          grad.reshape(E, Q, L, d), ev.x.reshape(E, Q, d),
                          wq * (np.abs(det) * ncof).reshape(E, Q), normal.reshape(E, Q, d))


def _scatter_matrix(idx, Ke, n) -> sp.csr_matrix:
    E, L = idx.shape
    rows = np.broadcast_to(idx[:, :, None], (E, L, L)).ravel()
    cols = np.broadcast_to(idx[:, None, :], (E, L, L)).ravel()
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_vector(idx, fe, n) -> np.ndarray:
    return np.bincount(idx.ravel(), weights=fe.ravel(), minlength=n)


def assemble_stiffness(patch: Patch, nq=None) -> sp.csr_matrix:
    """Matrix of ``a(phi_j, phi_i)`` over the patch (rows i, columns j)."""
    q = volume_quadrature(patch.geometry, nq)
    E, Q, L, d = q.grad.shape
    xf = q.x.reshape(E * Q, d)
    nu = patch.spec.nu_at(xf).reshape(E, Q)
    if np.any(nu <= 0):
        raise ValueError("diffusion coefficient must be positive")
    Ke = np.einsum("eq,eqad,eqbd->eab", q.w * nu, q.grad, q.grad)
    alpha = patch.spec.alpha_at(xf).reshape(E, Q)
    if np.any(alpha != 0):
        Ke += np.einsum("eq,eqa,eqb->eab", q.w * alpha, q.R, q.R)
    if patch.spec.has_advection:
        b = patch.spec.b_at(xf).reshape(E, Q, d)
        bg = np.einsum("eqd,eqbd->eqb", b, q.grad)
        Ke += np.einsum("eq,eqa,eqb->eab", q.w, q.R, bg)
    return _scatter_matrix(q.idx, Ke, patch.n_dofs)


def assemble_mass(patch: Patch, nq=None) -> sp.csr_matrix:
    q = volume_quadrature(patch.geometry, nq)
    Ke = np.einsum("eq,eqa,eqb->eab", q.w, q.R, q.R)
    return _scatter_matrix(q.idx, Ke, patch.n_dofs)


def assemble_neumann(patch: Patch, nq=None) -> np.ndarray:
    """Surface load ``int_{Neumann sides} h phi_i`` with ``h = nu du/dn``."""
    out = np.zeros(patch.n_dofs)
    for side in patch.sides:
        if patch.tags[side] != NEUMANN:
            continue
        q = side_quadrature(patch.geometry, side, nq)
        E, Q, L, d = q.grad.shape
        h = patch.spec.neumann_at(q.x.reshape(-1, d), q.normal.reshape(-1, d)).reshape(E, Q)
        out += _scatter_vector(q.idx, np.einsum("eq,eqa->ea", q.w * h, q.R), patch.n_dofs)
    return out


def assemble_load(patch: Patch, nq=None) -> np.ndarray:
    """Load vector: ``int f phi_i`` plus the Neumann surface terms."""
    q = volume_quadrature(patch.geometry, nq)
    E, Q, L, d = q.grad.shape
    f = patch.spec.f_at(q.x.reshape(-1, d)).reshape(E, Q)
    out = _scatter_vector(q.idx, np.einsum("eq,eqa->ea", q.w * f, q.R), patch.n_dofs)
    return out + assemble_neumann(patch, nq)


def side_flux_matrix(patch: Patch, side, nq=None) -> sp.csr_matrix:
    """``B_ij = -int_side nu (d phi_j / dn) phi_i``."""
    q = side_quadrature(patch.geometry, side, nq)
    E, Q, L, d = q.grad.shape
    nu = patch.spec.nu_at(q.x.reshape(-1, d)).reshape(E, Q)
    dn = np.einsum("eqbd,eqd->eqb", q.grad, q.normal)
    Ke = -np.einsum("eq,eqa,eqb->eab", q.w * nu, q.R, dn)
    return _scatter_matrix(q.idx, Ke, patch.n_dofs)


def side_mass_matrix(patch: Patch, side, nq=None) -> sp.csr_matrix:
    q = side_quadrature(patch.geometry, side, nq)
    Ke = np.einsum("eq,eqa,eqb->eab", q.w, q.R, q.R)
    return _scatter_matrix(q.idx, Ke, patch.n_dofs)


def interface_mass_matrix(patch: Patch, side, nq=None) -> np.ndarray:
    """Dense trace mass matrix ``int_gamma mu_j mu_i`` in face order."""
    dofs = patch.side_dofs(side)
    M = side_mass_matrix(patch, side, nq)
    return M[dofs][:, dofs].toarray()


def correction_matrix(patch: Patch, side, nq=None, flux=None) -> sp.csr_matrix:
    """Correction rows for the face-boundary functions of an interface side.

    ``C_ij = -int_G nu (d phi_j/dn) phi_i`` for ``i`` in the boundary set of the
    side, where ``G`` is the rest of the patch boundary minus Neumann sides.
    All other rows are zero.

    Parameters
    ----------
    flux : dict side -> sparse matrix, optional
        Precomputed :func:`side_flux_matrix` results.
    """
    side = side_name(*parse_side(side))
    rows = patch.partition.boundary.get(side)
    if rows is None:
        rows = patch.side_dofs(side)[patch.face(side).boundary]
    mask = np.zeros(patch.n_dofs)
    mask[rows] = 1.0
    D = sp.diags(mask)
    C = sp.csr_matrix((patch.n_dofs, patch.n_dofs))
    for other in patch.sides:
        if other == side or patch.tags[other] == NEUMANN:
            continue
        B = flux[other] if flux is not None else side_flux_matrix(patch, other, nq)
        C = C + D @ B
    return C.tocsr()


def compute_residuals(A_hat: Mapping, u: np.ndarray, f: np.ndarray, closure: Mapping) -> dict:
    """Face residuals ``r = (A + C)[closure, :] u - f[closure]``.

    Parameters
    ----------
    A_hat : mapping side -> sparse matrix ``A + C^(side)`` (or its closure rows)
    u, f : patch coefficient and load vectors
    closure : mapping side -> closure index array
    """
    out = {}
    for side, rows in closure.items():
        Ah = A_hat[side]
        if Ah.shape[0] == u.size:
            Ah = Ah[rows]
        if Ah.shape[1] != u.size:
            raise ValueError("dimension mismatch between matrix and solution")
        out[side] = Ah @ u - f[rows]
    return out


def interpolate_on_side(patch: Patch, side, fn: Callable) -> tuple[np.ndarray, np.ndarray]:
    """Greville collocation of ``fn`` on a side; returns (patch dofs, coefficients)."""
    face = patch.face(side)
    G = face.collocation_matrix()
    vals = np.asarray(fn(face.greville_phys), dtype=float)
    vals = np.broadcast_to(vals, (face.n,))
    return face.dofs, np.linalg.solve(G, vals)


def dirichlet_coefficients(patch: Patch) -> np.ndarray:
    """Full-length vector holding Greville-collocated Dirichlet data on Dirichlet dofs."""
    out = np.zeros(patch.n_dofs)
    for side in patch.sides:
        if patch.tags[side] == DIRICHLET:
            dofs, c = interpolate_on_side(patch, side, patch.spec.g_at)
            out[dofs] = c
    return out
