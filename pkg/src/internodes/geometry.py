"""NURBS spaces and geometry maps on the unit parameter cube.

A :class:`GeometryMap` stores weights and control points over a
:class:`~internodes.bspline.TensorBasis`.  The parametric dimension may be
smaller than the physical one, which is how patch faces are represented.

Coefficient arrays are indexed with the first parametric direction running
fastest.  Seen as a C-ordered array a coefficient grid therefore has shape
``(n_d, ..., n_1, c)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .bspline import (
    KnotVector,
    TensorBasis,
    basis_matrix,
    eval_basis_derivatives,
    elevate_degree,
    greville_abscissae,
    insert_knot,
    make_open_knot_vector,
)

__all__ = [
    "SIDES",
    "side_name",
    "parse_side",
    "NurbsSpace",
    "GeometryMap",
    "PointEval",
    "InversionResult",
    "InterfaceFace",
    "eval_nurbs",
    "map_point",
    "jacobian",
    "point_inversion",
    "extract_face",
    "make_box",
    "make_quarter_annulus",
    "make_ring_sector",
    "make_ruled_interface_patch",
    "make_coons_patch",
    "make_extruded",
    "interpolate_curve_bspline",
    "refine",
    "geometry_to_dict",
    "geometry_from_dict",
    "SingularJacobianError",
]

SIDES = ("u0", "u1", "v0", "v1", "w0", "w1")


class SingularJacobianError(ValueError):
    """Raised when a geometry map has a (numerically) singular Jacobian."""


def side_name(direction: int, end: int) -> str:
    return "uvw"[direction] + str(end)


def parse_side(side) -> tuple[int, int]:
    """``'u1'`` or ``(0, 1)`` to ``(direction, end)``."""
    if isinstance(side, str):
        if len(side) != 2 or side[0] not in "uvw" or side[1] not in "01":
            raise ValueError(f"unknown side {side!r}")
        return "uvw".index(side[0]), int(side[1])
    direction, end = side
    return int(direction), int(end)


@dataclass(frozen=True, eq=False)
class NurbsSpace:
    """Rational tensor-product space: a basis plus one positive weight per function."""

    basis: TensorBasis
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != self.basis.size:
            raise ValueError("one weight per basis function is required")
        if np.any(w <= 0):
            raise ValueError("NURBS weights must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


class PointEval(NamedTuple):
    """Rational basis data at a batch of ``m`` parameter points.

    ``idx[m, L]`` global indices of the active functions, ``R`` their values,
    ``dR[m, L, dpar]`` parametric gradients, ``x[m, dphys]`` mapped points and
    ``J[m, dphys, dpar]`` the Jacobian ``dx/dxi``.
    """

    idx: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    x: np.ndarray
    J: np.ndarray


def _tensor_active(kvs, xi, order):
    """Tensor B-spline values (and first derivatives) at scattered points."""
    m = xi.shape[0]
    idx = np.zeros((m, 1), dtype=np.int64)
    vals = np.ones((m, 1))
    ders = [np.ones((m, 1)) for _ in kvs] if order else []
    stride = 1
    for j, kv in enumerate(kvs):
        first, d = eval_basis_derivatives(kv, xi[:, j], order=order)
        first = np.atleast_1d(first)
        d = d.reshape(m, order + 1, kv.degree + 1)
        loc = first[:, None] + np.arange(kv.degree + 1)
        idx = (loc[:, :, None] * stride + idx[:, None, :]).reshape(m, -1)
        v0 = d[:, 0, :]
        if order:
            for i in range(len(kvs)):
                f = d[:, 1, :] if i == j else v0
                ders[i] = (f[:, :, None] * ders[i][:, None, :]).reshape(m, -1)
        vals = (v0[:, :, None] * vals[:, None, :]).reshape(m, -1)
        stride *= kv.n
    return idx, vals, ders


def eval_nurbs(space: NurbsSpace, xi, gradients: bool = True):
    """Active rational basis values and parametric gradients.

    Parameters
    ----------
    space : NurbsSpace
    xi : array_like, shape (m, d) or (d,)
        Points of the unit parameter cube.

    Returns
    -------
    idx : ndarray (m, L)
    R : ndarray (m, L)
    dR : ndarray (m, L, d) or None
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    d = space.basis.dim
    if xi.shape[1] != d:
        raise ValueError(f"expected {d}-dimensional parameter points")
    if np.any(xi < 0) or np.any(xi > 1):
        raise ValueError("parameter points must lie in the unit cube")
    idx, B, dB = _tensor_active(space.basis.kvs, xi, 1 if gradients else 0)
    w = space.weights[idx]
    wB = w * B
    W = wB.sum(axis=1, keepdims=True)
    R = wB / W
    if not gradients:
        return idx, R, None
    dR = np.empty(B.shape + (d,))
    for j in range(d):
        wdB = w * dB[j]
        dW = wdB.sum(axis=1, keepdims=True)
        dR[:, :, j] = (wdB - R * dW) / W
    return idx, R, dR


@dataclass(frozen=True, eq=False)
class GeometryMap:
    """A NURBS map from the parameter cube to physical space.

    Attributes
    ----------
    space : NurbsSpace
    control_points : ndarray, shape (N, dphys)
    """

    space: NurbsSpace
    control_points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.control_points, dtype=float)
        if P.ndim != 2 or P.shape[0] != self.space.basis.size:
            raise ValueError("control points must have shape (N, dphys)")
        P.setflags(write=False)
        object.__setattr__(self, "control_points", P)

    @classmethod
    def from_arrays(cls, kvs, weights, control_points):
        return cls(NurbsSpace(TensorBasis(tuple(kvs)), weights), control_points)

    @property
    def basis(self) -> TensorBasis:
        return self.space.basis

    @property
    def kvs(self) -> tuple:
        return self.space.basis.kvs

    @property
    def weights(self) -> np.ndarray:
        return self.space.weights

    @property
    def dim_param(self) -> int:
        return self.space.basis.dim

    @property
    def dim_phys(self) -> int:
        return self.control_points.shape[1]

    @property
    def degrees(self) -> tuple:
        return self.space.basis.degrees

    @property
    def shape(self) -> tuple:
        return self.space.basis.shape

    @property
    def n_el(self) -> tuple:
        return tuple(kv.n_el for kv in self.kvs)

    @property
    def diameter(self) -> float:
        """Bounding-box diagonal of the control net (an upper bound for the patch)."""
        P = self.control_points
        return float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))

    def evaluate(self, xi) -> PointEval:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        idx, R, dR = eval_nurbs(self.space, xi)
        P = self.control_points[idx]
        x = np.einsum("ml,mlc->mc", R, P)
        J = np.einsum("mlj,mlc->mcj", dR, P)
        return PointEval(idx, R, dR, x, J)

    def __call__(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        idx, R, _ = eval_nurbs(self.space, xi, gradients=False)
        return np.einsum("ml,mlc->mc", R, self.control_points[idx])

    def mesh_size(self) -> float:
        """Largest physical element diagonal, estimated from element corner images."""
        breaks = [kv.breaks for kv in self.kvs]
        grid = np.meshgrid(*breaks, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=-1)
        x = self(pts).reshape(tuple(b.size for b in breaks) + (self.dim_phys,))
        h = 0.0
        corners = np.array(np.meshgrid(*[[0, 1]] * self.dim_param, indexing="ij")).reshape(
            self.dim_param, -1).T
        for c in corners:
            for o in corners:
                if np.all(o >= c) and np.any(o != c):
                    sl_a = tuple(slice(ci, b.size - 1 + ci) for ci, b in zip(c, breaks))
                    sl_b = tuple(slice(oi, b.size - 1 + oi) for oi, b in zip(o, breaks))
                    h = max(h, float(np.max(np.linalg.norm(x[sl_a] - x[sl_b], axis=-1))))
        return h

    def side(self, side) -> "GeometryMap":
        """Restriction to a parametric side, as a map of one dimension less."""
        direction, end = parse_side(side)
        if self.dim_param < 2:
            raise ValueError("a univariate map has no faces of positive dimension")
        dofs = self.basis.side_indices(direction, end)
        kvs = tuple(kv for j, kv in enumerate(self.kvs) if j != direction)
        return GeometryMap.from_arrays(kvs, self.weights[dofs], self.control_points[dofs])

    def check_jacobian_sign(self, samples: int = 5) -> bool:
        """Sampled proxy for invertibility: det J keeps one sign and stays away from 0."""
        if self.dim_param != self.dim_phys:
            raise ValueError("only square maps have a Jacobian determinant")
        pts = []
        for kv in self.kvs:
            t = np.concatenate([np.linspace(a, b, samples) for a, b in
                                zip(kv.breaks[:-1], kv.breaks[1:])])
            pts.append(np.unique(t))
        grid = np.meshgrid(*pts, indexing="ij")
        xi = np.stack([g.ravel() for g in grid], axis=-1)
        det = np.linalg.det(self.evaluate(xi).J)
        scale = self.diameter ** self.dim_param
        return bool(np.all(det > 1e-12 * scale) or np.all(det < -1e-12 * scale))


def map_point(geo: GeometryMap, xi) -> np.ndarray:
    """Physical image of parameter points; scalar input gives a single point."""
    single = np.ndim(xi) == 1
    x = geo(xi)
    return x[0] if single else x


def jacobian(geo: GeometryMap, xi) -> np.ndarray:
    """Jacobian ``dx/dxi``; raises :class:`SingularJacobianError` for square singular maps."""
    single = np.ndim(xi) == 1
    J = geo.evaluate(xi).J
    if geo.dim_param == geo.dim_phys:
        det = np.abs(np.linalg.det(J))
        if np.any(det < 1e-12 * geo.diameter ** geo.dim_param):
            raise SingularJacobianError("singular Jacobian at a sampled parameter point")
    return J[0] if single else J


# ---------------------------------------------------------------------------
# coefficient grids and refinement
# ---------------------------------------------------------------------------

def _homogeneous(geo: GeometryMap) -> np.ndarray:
    w = geo.weights[:, None]
    return np.hstack([geo.control_points * w, w])


def _from_homogeneous(kvs, Pw) -> GeometryMap:
    w = Pw[:, -1]
    return GeometryMap.from_arrays(kvs, w, Pw[:, :-1] / w[:, None])


def _apply_along(coeffs, shape, direction, fn):
    """Apply a univariate coefficient operation ``fn(c[n, k]) -> c'[n', k]`` along one direction."""
    c = coeffs.shape[-1]
    grid = coeffs.reshape(tuple(reversed(shape)) + (c,))
    axis = len(shape) - 1 - direction
    moved = np.moveaxis(grid, axis, 0)
    rest = moved.shape[1:]
    out = fn(moved.reshape(moved.shape[0], -1))
    out = out.reshape((out.shape[0],) + rest)
    grid = np.moveaxis(out, 0, axis)
    return grid.reshape(-1, c)


def refine(geo: GeometryMap, degrees=None, n_el=None, knots=None) -> GeometryMap:
    """Degree elevation followed by knot insertion, preserving the geometry.

    Parameters
    ----------
    degrees : sequence of int, optional
        Target degree per direction (must not be below the current one).
    n_el : sequence of int, optional
        Target number of uniform elements per direction; the knots ``i / n_el``
        that are not present yet are inserted.
    knots : sequence of sequences, optional
        Explicit knots to insert per direction (alternative to ``n_el``).
    """
    kvs = list(geo.kvs)
    Pw = _homogeneous(geo)
    d = len(kvs)
    degrees = list(degrees) if degrees is not None else [kv.degree for kv in kvs]
    for j in range(d):
        if degrees[j] < kvs[j].degree:
            raise ValueError("degree reduction is not supported")
        while kvs[j].degree < degrees[j]:
            box = {}

            def lift(c, j=j, box=box):
                box["kv"], out = elevate_degree(kvs[j], c)
                return out

            Pw = _apply_along(Pw, tuple(kv.n for kv in kvs), j, lift)
            kvs[j] = box["kv"]
    if n_el is not None and knots is None:
        knots = []
        for j in range(d):
            present = set(np.round(kvs[j].breaks * n_el[j], 12))
            knots.append([i / n_el[j] for i in range(1, n_el[j])
                          if float(i) not in present])
    if knots is not None:
        for j in range(d):
            for z in knots[j]:
                box = {}

                def ins(c, j=j, z=z, box=box):
                    box["kv"], out = insert_knot(kvs[j], c, z)
                    return out

                Pw = _apply_along(Pw, tuple(kv.n for kv in kvs), j, ins)
                kvs[j] = box["kv"]
    return _from_homogeneous(tuple(kvs), Pw)


# ---------------------------------------------------------------------------
# point inversion
# ---------------------------------------------------------------------------

class InversionResult(NamedTuple):
    xi: np.ndarray
    residual: np.ndarray
    success: np.ndarray


def _seed_grid(geo: GeometryMap, per_element: int = 4) -> np.ndarray:
    axes = []
    for kv in geo.kvs:
        t = np.concatenate([np.linspace(a, b, per_element + 1) for a, b in
                            zip(kv.breaks[:-1], kv.breaks[1:])])
        axes.append(np.unique(t))
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


def point_inversion(geo, x, tol: float | None = None, max_it: int = 50) -> InversionResult:
    """Closest parameter point of a map (face or volume) to physical points.

    Gauss-Newton with a backtracking line search; iterates are clamped to the
    closed parameter cube.  ``success`` is true where the final distance is at
    most ``tol`` (default ``1e-10`` times the map diameter).

    Parameters
    ----------
    geo : GeometryMap or InterfaceFace
    x : array_like, shape (m, dphys) or (dphys,)
    """
    if isinstance(geo, InterfaceFace):
        geo = geo.geometry
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if tol is None:
        tol = 1e-10 * geo.diameter
    seeds = _seed_grid(geo)
    xs = geo(seeds)
    # nearest seed per target, in chunks to bound memory
    xi = np.empty((x.shape[0], geo.dim_param))
    for s in range(0, x.shape[0], 256):
        d2 = ((x[s:s + 256, None, :] - xs[None, :, :]) ** 2).sum(-1)
        xi[s:s + 256] = seeds[np.argmin(d2, axis=1)]
    ev = geo.evaluate(xi)
    res = x - ev.x
    dist = np.linalg.norm(res, axis=1)
    active = dist > 0.01 * tol
    eps = 1e-14
    for _ in range(max_it):
        if not np.any(active):
            break
        a = np.flatnonzero(active)
        J = ev.J[a]
        JtJ = np.einsum("mci,mcj->mij", J, J)
        JtJ += eps * np.eye(geo.dim_param) * np.trace(JtJ, axis1=1, axis2=2)[:, None, None]
        step = np.linalg.solve(JtJ, np.einsum("mci,mc->mi", J, res[a])[..., None])[..., 0]
        t = np.ones(a.size)
        accepted = np.zeros(a.size, dtype=bool)
        new_xi = xi[a].copy()
        new_dist = dist[a].copy()
        for _ in range(12):
            todo = ~accepted
            if not np.any(todo):
                break
            cand = np.clip(xi[a][todo] + t[todo, None] * step[todo], 0.0, 1.0)
            cd = np.linalg.norm(x[a][todo] - geo(cand), axis=1)
            ok = cd < dist[a][todo] * (1 - 1e-12) + 1e-300
            sel = np.flatnonzero(todo)[ok]
            new_xi[sel], new_dist[sel] = cand[ok], cd[ok]
            accepted[sel] = True
            t[todo] *= 0.5
        moved = np.linalg.norm(new_xi - xi[a], axis=1)
        xi[a], dist[a] = new_xi, new_dist
        ev_a = geo.evaluate(xi[a])
        res[a] = x[a] - ev_a.x
        ev.J[a] = ev_a.J
        done = (~accepted) | (moved < 1e-15) | (dist[a] <= 0.01 * tol)
        active[a[done]] = False
    out = InversionResult(xi, dist, dist <= tol)
    if single:
        return InversionResult(out.xi[0], out.residual[0], bool(out.success[0]))
    return out


# ---------------------------------------------------------------------------
# faces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InterfaceFace:
    """One parametric side of a patch together with its trace space.

    Attributes
    ----------
    patch : int
        Patch index.
    side : str
        Side name (``'u0'``, ``'u1'``, ``'v0'`` ...).
    geometry : GeometryMap
        Restriction of the patch map to the side.
    dofs : ndarray of int
        Patch basis index of each trace basis function, in face order.
    greville_param : ndarray (n, d-1)
    greville_phys : ndarray (n, d)
    boundary : ndarray of bool
        True for trace functions that do not vanish on the face boundary.
    role : str
        ``'master'``, ``'slave'`` or ``''`` when untagged.
    """

    patch: int
    side: str
    geometry: GeometryMap
    dofs: np.ndarray
    greville_param: np.ndarray
    greville_phys: np.ndarray
    boundary: np.ndarray
    role: str = ""

    @property
    def key(self) -> tuple:
        return (self.patch, self.side)

    @property
    def n(self) -> int:
        return self.dofs.size

    def collocation_matrix(self, params=None) -> np.ndarray:
        """Dense matrix of trace basis values at face parameter points (default: own Greville nodes)."""
        params = self.greville_param if params is None else np.atleast_2d(params)
        idx, R, _ = eval_nurbs(self.geometry.space, params, gradients=False)
        G = np.zeros((params.shape[0], self.n))
        np.put_along_axis(G, idx, R, axis=1)
        return G


def extract_face(geo: GeometryMap, side, patch: int = 0, role: str = "") -> InterfaceFace:
    """Build the :class:`InterfaceFace` of a patch side."""
    direction, end = parse_side(side)
    fgeo = geo.side((direction, end))
    dofs = geo.basis.side_indices(direction, end)
    gparam = fgeo.basis.greville()
    gphys = fgeo(gparam)
    multi = fgeo.basis.unravel(np.arange(fgeo.basis.size))
    shape = np.array(fgeo.basis.shape)
    boundary = np.any((multi == 0) | (multi == shape - 1), axis=1)
    return InterfaceFace(patch, side_name(direction, end), fgeo, dofs, gparam, gphys,
                         boundary, role)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _arc(radius, theta0, theta1):
    """Rational quadratic arc: control points (3, 2) and weights (3,)."""
    half = 0.5 * (theta1 - theta0)
    if not 0 < half <= np.pi / 4 + 1e-15:
        raise ValueError("arc opening must lie in (0, pi/2]")
    mid = 0.5 * (theta0 + theta1)
    w = np.cos(half)
    P = np.array([
        [np.cos(theta0), np.sin(theta0)],
        [np.cos(mid) / w, np.sin(mid) / w],
        [np.cos(theta1), np.sin(theta1)],
    ]) * radius
    if abs(theta1 - theta0 - np.pi / 2) < 1e-15 and theta0 == 0.0:
        # exact corner for the quarter circle
        P = np.array([[radius, 0.0], [radius, radius], [0.0, radius]])
    return P, np.array([1.0, w, 1.0])


def make_ring_sector(r_in: float, r_out: float, theta0: float, theta1: float,
                     center=(0.0, 0.0)) -> GeometryMap:
    """Sector of a ring; first parameter radial (degree 1), second angular (degree 2)."""
    if not 0 < r_in < r_out:
        raise ValueError("radii must satisfy 0 < r_in < r_out")
    if not theta1 > theta0:
        raise ValueError("theta1 must exceed theta0")
    Pin, w = _arc(r_in, theta0, theta1)
    Pout, _ = _arc(r_out, theta0, theta1)
    P = np.empty((6, 2))
    P[0::2] = Pin
    P[1::2] = Pout
    P += np.asarray(center, dtype=float)
    kvs = (make_open_knot_vector(1, 1), make_open_knot_vector(2, 1))
    return GeometryMap.from_arrays(kvs, np.repeat(w, 2), P)


def make_quarter_annulus(r_in: float, r_out: float) -> GeometryMap:
    """Quarter annulus in the first quadrant with the six-point coarse representation."""
    return make_ring_sector(r_in, r_out, 0.0, np.pi / 2)


def make_box(lower, upper) -> GeometryMap:
    """Axis-aligned box in 1, 2 or 3 dimensions with degree-1 identity-like map."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    if np.any(upper <= lower):
        raise ValueError("upper corner must exceed lower corner")
    kvs = tuple(make_open_knot_vector(1, 1) for _ in range(d))
    multi = TensorBasis(kvs).unravel(np.arange(2 ** d))
    P = lower + multi * (upper - lower)
    return GeometryMap.from_arrays(kvs, np.ones(2 ** d), P)


def make_ruled_interface_patch(curve, opposite, curve_first: bool = False) -> GeometryMap:
    """Ruled surface between two curves sharing one knot vector and weight vector.

    Parameters
    ----------
    curve, opposite : GeometryMap
        Univariate maps with identical knot vectors and weights.
    curve_first : bool
        When true ``curve`` is the side ``u0``; otherwise ``opposite`` is ``u0``
        and ``curve`` is ``u1``.
    """
    if curve.kvs[0] != opposite.kvs[0]:
        raise ValueError("the two curves must share their knot vector")
    if not np.allclose(curve.weights, opposite.weights, rtol=0, atol=1e-15):
        raise ValueError("the two curves must share their weights")
    a, b = (curve, opposite) if curve_first else (opposite, curve)
    n = curve.basis.size
    P = np.empty((2 * n, curve.dim_phys))
    P[0::2] = a.control_points
    P[1::2] = b.control_points
    kvs = (make_open_knot_vector(1, 1), curve.kvs[0])
    return GeometryMap.from_arrays(kvs, np.repeat(curve.weights, 2), P)


def make_coons_patch(left, right, bottom, top) -> GeometryMap:
    """Bilinearly blended patch from four polynomial boundary curves.

    ``left``/``right`` are the sides ``u0``/``u1`` (parametrised by ``v``) and
    ``bottom``/``top`` the sides ``v0``/``v1`` (parametrised by ``u``).  The
    blend is applied to the control nets with Greville weights, which keeps the
    four boundary curves exact.
    """
    for c in (left, right, bottom, top):
        if not np.allclose(c.weights, 1.0):
            raise ValueError("Coons blending is implemented for polynomial curves only")
    if left.kvs[0] != right.kvs[0] or bottom.kvs[0] != top.kvs[0]:
        raise ValueError("opposite curves must share their knot vector")
    ku, kv = bottom.kvs[0], left.kvs[0]
    s = greville_abscissae(ku)[None, :, None]
    t = greville_abscissae(kv)[:, None, None]
    L, Rt = left.control_points[:, None, :], right.control_points[:, None, :]
    B, T = bottom.control_points[None, :, :], top.control_points[None, :, :]
    c00, c10 = bottom.control_points[0], bottom.control_points[-1]
    c01, c11 = top.control_points[0], top.control_points[-1]
    for a, b in ((c00, left.control_points[0]), (c10, right.control_points[0]),
                 (c01, left.control_points[-1]), (c11, right.control_points[-1])):
        if not np.allclose(a, b, atol=1e-12):
            raise ValueError("boundary curves do not meet at the corners")
    P = ((1 - s) * L + s * Rt + (1 - t) * B + t * T
         - ((1 - s) * (1 - t) * c00 + s * (1 - t) * c10 + (1 - s) * t * c01 + s * t * c11))
    # rows: v index, columns: u index -> first direction (u) fastest
    P = P.reshape(-1, P.shape[-1])
    return GeometryMap.from_arrays((ku, kv), np.ones(P.shape[0]), P)


def make_extruded(surface: GeometryMap, z0: float, z1: float) -> GeometryMap:
    """Extrude a planar map along ``z``; the third parameter is linear in ``z``."""
    if surface.dim_param != 2 or surface.dim_phys != 2:
        raise ValueError("extrusion expects a planar two-parameter map")
    if not z1 > z0:
        raise ValueError("z1 must exceed z0")
    n = surface.basis.size
    P = np.empty((2 * n, 3))
    P[:n, :2] = surface.control_points
    P[:n, 2] = z0
    P[n:, :2] = surface.control_points
    P[n:, 2] = z1
    kvs = surface.kvs + (make_open_knot_vector(1, 1),)
    return GeometryMap.from_arrays(kvs, np.tile(surface.weights, 2), P)


def interpolate_curve_bspline(g: Callable, p: int, kv: KnotVector | None = None) -> GeometryMap:
    """B-spline curve interpolating ``g`` at the Greville abscissae of ``kv``.

    ``g`` maps parameters ``t`` (array) either to scalars, in which case the
    interpolated points are ``(g(t), t)``, or to points of shape ``(m, d)``.
    The default knot vector is the single-element one of degree ``p``.
    """
    kv = make_open_knot_vector(p, 1) if kv is None else kv
    if kv.degree != p:
        raise ValueError("knot vector degree does not match p")
    t = greville_abscissae(kv)
    vals = np.asarray(g(t), dtype=float)
    Q = np.column_stack([vals, t]) if vals.ndim == 1 else vals
    B = basis_matrix(kv, t)
    cond = np.linalg.cond(B)
    if not (np.isfinite(cond) and cond < 1e12):
        raise ValueError("Greville collocation matrix is singular")
    P = np.linalg.solve(B, Q)
    return GeometryMap.from_arrays((kv,), np.ones(kv.n), P)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def geometry_to_dict(geo: GeometryMap) -> dict:
    """Plain-data description: degrees, knots, weights and control points in index order."""
    return {
        "degrees": [int(kv.degree) for kv in geo.kvs],
        "knots": [[float(v) for v in kv.knots] for kv in geo.kvs],
        "weights": [float(v) for v in geo.weights],
        "control_points": [[float(v) for v in row] for row in geo.control_points],
    }


def geometry_from_dict(data: dict) -> GeometryMap:
    try:
        kvs = tuple(KnotVector(np.array(k, dtype=float), int(p))
                    for k, p in zip(data["knots"], data["degrees"]))
        return GeometryMap.from_arrays(kvs, np.array(data["weights"], dtype=float),
                                       np.array(data["control_points"], dtype=float))
    except KeyError as exc:
        raise ValueError(f"geometry description lacks field {exc}") from None
