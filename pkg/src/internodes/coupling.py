"""Intergrid operators between interface faces.

Two interpolation paths are provided:

* watertight faces: Greville collocation, ``P = G_kk^{-1} diag(U) G_kl``,
  where ``G_kl`` evaluates the trace basis of face ``l`` at the (inverted)
  Greville nodes of face ``k`` and ``U`` is a partition of unity over the
  faces adjacent to ``k``;
* non-watertight faces: rescaled localized RBF interpolation with a Wendland
  C2 kernel between Greville node clouds, wrapped between the two collocation
  matrices so that it maps primal coefficients to primal coefficients.

Normal derivatives travel the other way through the dual-basis pipeline
``M_master P M_slave^{-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.spatial import cKDTree

from .assembly import INTERFACE, Patch, interface_mass_matrix
from .geometry import InterfaceFace, parse_side, point_inversion, side_name

__all__ = [
    "CouplingError",
    "InterfacePair",
    "Adjacency",
    "CouplingOperators",
    "wendland_c2",
    "build_collocation_matrices",
    "build_greville_P",
    "rbf_matrix",
    "default_rbf_radius",
    "build_rbf_P",
    "build_adjacency",
    "build_coupling",
    "transfer_normal_derivative",
    "measure_gap",
]

MASTER = "master"
SLAVE = "slave"


class CouplingError(ValueError):
    """Inconsistent interface configuration or failed node matching."""


def wendland_c2(dist, r: float):
    """Wendland C2 function ``max(0, 1 - d/r)^4 (1 + 4 d/r)``.

    Parameters
    ----------
    dist : array_like
        Nonnegative distances.
    r : float
        Support radius, ``r > 0``.
    """
    if not r > 0:
        raise ValueError(f"support radius must be positive, got {r}")
    t = np.asarray(dist, dtype=float) / r
    return np.maximum(0.0, 1.0 - t) ** 4 * (1.0 + 4.0 * t)


@dataclass(frozen=True)
class InterfacePair:
    """A master face and a slave face that touch.

    Faces are ``(patch index, side name)`` tuples with 0-based patch indices.
    """

    master: tuple
    slave: tuple
    watertight: bool = True
    radius: float | None = None

    def __post_init__(self):
        m = (int(self.master[0]), side_name(*parse_side(self.master[1])))
        s = (int(self.slave[0]), side_name(*parse_side(self.slave[1])))
        if m == s:
            raise CouplingError(f"face {m} cannot be its own neighbour")
        object.__setattr__(self, "master", m)
        object.__setattr__(self, "slave", s)


@dataclass
class Adjacency:
    """Face adjacency with Greville-node membership and partition-of-unity weights.

    Attributes
    ----------
    faces : dict key -> InterfaceFace
        Every interface face, keyed by ``(patch, side)``.
    neighbours : dict key -> list of keys
        The adjacent faces, in configuration order.
    member : dict (key, key) -> ndarray of bool
        ``member[k, l][i]`` is true when Greville node ``i`` of ``k`` lies on ``l``.
    params : dict (key, key) -> ndarray (n_k, d-1)
        Parameters on ``l`` of the inverted Greville nodes of ``k`` (watertight only).
    weights : dict key -> ndarray
        ``1 / #{l : node i of k lies on l}``.
    watertight : dict (key, key) -> bool
    radius : dict (key, key) -> float or None
        Configured RBF radius for non-watertight pairs.
    """

    faces: dict
    neighbours: dict
    member: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    watertight: dict = field(default_factory=dict)
    radius: dict = field(default_factory=dict)

    def role(self, key) -> str:
        return self.faces[key].role

    @property
    def masters(self) -> list:
        return [k for k, f in self.faces.items() if f.role == MASTER]

    @property
    def slaves(self) -> list:
        return [k for k, f in self.faces.items() if f.role == SLAVE]


def build_collocation_matrices(face_k: InterfaceFace, face_l: InterfaceFace, watertight: bool = True,
                               tol: float | None = None, params=None, member=None):
    """Collocation matrices ``G_kk`` and ``G_kl`` at the Greville nodes of ``face_k``.

    Rows of ``G_kl`` for nodes that do not lie on ``face_l`` are zero.

    Parameters
    ----------
    tol : float, optional
        Membership tolerance on the inversion distance (default ``1e-8`` times
        the larger face diameter).
    params, member : ndarray, optional
        Precomputed inversion result (as stored in :class:`Adjacency`).

    Raises
    ------
    CouplingError
        When ``watertight`` and a node of ``face_k`` misses ``face_l``.  In the
        multi-face setting membership is checked by :func:`build_adjacency`, which
        passes ``member`` explicitly.
    """
    G_kk = face_k.collocation_matrix()
    if params is None:
        if tol is None:
            tol = 1e-8 * max(face_k.geometry.diameter, face_l.geometry.diameter)
        inv = point_inversion(face_l, face_k.greville_phys, tol=0.01 * tol)
        params = inv.xi
        ok = inv.residual <= tol
        if member is None:
            if watertight and not np.all(ok):
                i = int(np.flatnonzero(~ok)[0])
                raise CouplingError(
                    f"Greville node {i} of face {face_k.key} at {face_k.greville_phys[i]} "
                    f"is {inv.residual[i]:.3e} away from face {face_l.key}")
            member = ok
    member = np.asarray(member, dtype=bool)
    G_kl = np.zeros((face_k.n, face_l.n))
    if np.any(member):
        G_kl[member] = face_l.collocation_matrix(params[member])
    return G_kk, G_kl


def build_greville_P(G_kk, G_kl, weights=None) -> np.ndarray:
    """``P = G_kk^{-1} diag(U) G_kl`` by dense LU with partial pivoting."""
    G_kk = np.asarray(G_kk, dtype=float)
    rhs = np.asarray(G_kl, dtype=float)
    if weights is not None:
        rhs = np.asarray(weights, dtype=float)[:, None] * rhs
    return sla.lu_solve(sla.lu_factor(G_kk), rhs)


def rbf_matrix(x_target, x_source, r: float) -> np.ndarray:
    """``Phi_ij = wendland_c2(|x_target_i - x_source_j|, r)``."""
    x_target = np.atleast_2d(x_target)
    x_source = np.atleast_2d(x_source)
    d = np.linalg.norm(x_target[:, None, :] - x_source[None, :, :], axis=-1)
    return wendland_c2(d, r)


def default_rbf_radius(x_source) -> float:
    """Three times the largest nearest-neighbour spacing of the source nodes."""
    x_source = np.atleast_2d(x_source)
    if x_source.shape[0] < 2:
        raise CouplingError("RBF interpolation needs at least two source nodes")
    d, _ = cKDTree(x_source).query(x_source, k=2)
    return 3.0 * float(d[:, 1].max())


def _rl_rbf(x_target, x_source, r):
    Phi_ss = rbf_matrix(x_source, x_source, r)
    Phi_ts = rbf_matrix(x_target, x_source, r)
    lu = sla.lu_factor(Phi_ss)
    W = sla.lu_solve(lu, Phi_ts.T, trans=1).T
    denom = W.sum(axis=1)
    return Phi_ss, W, denom


def build_rbf_P(face_k: InterfaceFace, face_l: InterfaceFace, radius: float | None = None,
                max_enlarge: int = 3):
    """Rescaled localized RBF interpolation from ``face_l`` to ``face_k``.

    Returns
    -------
    P : ndarray (n_k, n_l)
        Composite ``G_kk^{-1} P^RBF G_ll`` acting on primal coefficients.
    P_rbf : ndarray (n_k, n_l)
        Nodal operator, rows summing to one.
    radius : float
        The support radius actually used.

    Raises
    ------
    CouplingError
        If the kernel matrix stays singular or a rescaling denominator stays
        zero after ``max_enlarge`` enlargements of the radius by 1.5.
    """
    xs, xt = face_l.greville_phys, face_k.greville_phys
    r = default_rbf_radius(xs) if radius is None else float(radius)
    for attempt in range(max_enlarge + 1):
        try:
            Phi_ss, W, denom = _rl_rbf(xt, xs, r)
            good = np.linalg.cond(Phi_ss) < 1e12 and np.all(np.abs(denom) > 1e-12)
        except (np.linalg.LinAlgError, sla.LinAlgWarning):
            good = False
        if good:
            break
        if attempt == max_enlarge:
            raise CouplingError(
                f"RBF interpolation {face_l.key} -> {face_k.key} is singular with radius "
                f"{r:.4g}; configure a larger radius")
        r *= 1.5
    P_rbf = W / denom[:, None]
    G_kk = face_k.collocation_matrix()
    G_ll = face_l.collocation_matrix()
    P = sla.lu_solve(sla.lu_factor(G_kk), P_rbf @ G_ll)
    return P, P_rbf, r


def _validate_pairs(patches, pairs):
    roles = {}
    for pair in pairs:
        for key, role in ((pair.master, MASTER), (pair.slave, SLAVE)):
            k, side = key
            if not 0 <= k < len(patches):
                raise CouplingError(f"patch index {k} out of range")
            if patches[k].tags.get(side) != INTERFACE:
                raise CouplingError(f"face {key} is not tagged as an interface side")
            if roles.setdefault(key, role) != role:
                raise CouplingError(f"face {key} is declared both master and slave")
    for k, patch in enumerate(patches):
        for side in patch.sides:
            if patch.tags[side] == INTERFACE and (k, side) not in roles:
                raise CouplingError(f"interface face {(k, side)} has no adjacent face")
    return roles


def build_adjacency(patches, pairs, node_tol: float | None = None) -> Adjacency:
    """Adjacency sets, node membership and partition-of-unity weights.

    Parameters
    ----------
    patches : sequence of Patch
    pairs : sequence of InterfacePair
    node_tol : float, optional
        Distance below which a Greville node is on a face; default ``1e-8``
        times the diameter of the union of patches.

    Raises
    ------
    CouplingError
        Inconsistent roles, a face with no neighbour, a non-watertight face
        with more than one neighbour, or a node of a watertight face that lies
        on none of its neighbours.
    """
    pairs = [p if isinstance(p, InterfacePair) else InterfacePair(**p) for p in pairs]
    roles = _validate_pairs(patches, pairs)
    if node_tol is None:
        pts = np.vstack([p.geometry.control_points for p in patches])
        node_tol = 1e-8 * float(np.linalg.norm(pts.max(0) - pts.min(0)))
    faces = {key: patches[key[0]].face(key[1], key[0], role) for key, role in roles.items()}
    adj = Adjacency(faces, {key: [] for key in faces})
    for pair in pairs:
        for a, b in ((pair.master, pair.slave), (pair.slave, pair.master)):
            if b in adj.neighbours[a]:
                raise CouplingError(f"pair {pair.master} / {pair.slave} declared twice")
            adj.neighbours[a].append(b)
            adj.watertight[a, b] = pair.watertight
            adj.radius[a, b] = pair.radius
    for key, neigh in adj.neighbours.items():
        wt = [adj.watertight[key, l] for l in neigh]
        if not all(wt) and len(neigh) > 1:
            raise CouplingError(f"non-watertight face {key} must have exactly one neighbour")
        face = faces[key]
        count = np.zeros(face.n)
        for l in neigh:
            if adj.watertight[key, l]:
                inv = point_inversion(faces[l], face.greville_phys, tol=0.01 * node_tol)
                ok = inv.residual <= node_tol
                adj.params[key, l] = inv.xi
            else:
                ok = np.ones(face.n, dtype=bool)
            adj.member[key, l] = ok
            count += ok
        if np.any(count == 0):
            i = int(np.flatnonzero(count == 0)[0])
            raise CouplingError(
                f"Greville node {i} of face {key} at {face.greville_phys[i]} lies on none of "
                f"its neighbours {neigh}")
        adj.weights[key] = 1.0 / count
    return adj


@dataclass
class CouplingOperators:
    """Dense intergrid matrices for every ordered pair of adjacent faces.

    ``P[k, l]`` maps primal trace coefficients of face ``l`` to face ``k``;
    ``M[k]`` is the interface mass matrix of face ``k``.
    """

    adjacency: Adjacency
    P: dict
    M: dict
    radii: dict = field(default_factory=dict)
    _mass_lu: dict = field(default_factory=dict, repr=False)

    def mass_solve(self, key, r) -> np.ndarray:
        if key not in self._mass_lu:
            self._mass_lu[key] = sla.cho_factor(self.M[key])
        return sla.cho_solve(self._mass_lu[key], r)

    def Q_master_slave(self, master, slave) -> np.ndarray:
        """Dual transfer ``M_master P_master<-slave M_slave^{-1}`` as a dense matrix."""
        P = self.P[master, slave]
        return self.M[master] @ self.mass_solve(slave, P.T).T

    def transfer(self, master, slave, r_slave) -> np.ndarray:
        return transfer_normal_derivative(r_slave, self.M[slave], self.M[master],
                                          self.P[master, slave],
                                          solve=lambda v: self.mass_solve(slave, v))


def build_coupling(patches, adjacency: Adjacency, nq=None) -> CouplingOperators:
    """Interpolation and mass matrices for all adjacent face pairs."""
    adj = adjacency
    P, radii = {}, {}
    M = {key: interface_mass_matrix(patches[key[0]], key[1], nq) for key in adj.faces}
    for k, neigh in adj.neighbours.items():
        fk = adj.faces[k]
        for l in neigh:
            if adj.watertight[k, l]:
                G_kk, G_kl = build_collocation_matrices(fk, adj.faces[l], params=adj.params[k, l],
                                                        member=adj.member[k, l])
                P[k, l] = build_greville_P(G_kk, G_kl, adj.weights[k])
            else:
                P[k, l], _, radii[k, l] = build_rbf_P(fk, adj.faces[l], adj.radius[k, l])
    return CouplingOperators(adj, P, M, radii)


def transfer_normal_derivative(r_slave, M_slave, M_master, P_master_slave, solve=None) -> np.ndarray:
    """Move a slave residual to the master face: ``M_master P M_slave^{-1} r_slave``.

    Parameters
    ----------
    r_slave : ndarray (n_s,)
        Dual coefficients of the slave normal derivative.
    M_slave, M_master : ndarray
        Interface mass matrices.
    P_master_slave : ndarray (n_m, n_s)
    solve : callable, optional
        Replacement for the slave mass solve (for cached factorizations).
    """
    r_slave = np.asarray(r_slave, dtype=float)
    P = np.asarray(P_master_slave)
    if P.shape != (np.shape(M_master)[0], np.shape(M_slave)[0]) or r_slave.shape[0] != P.shape[1]:
        raise ValueError("dimension mismatch in normal-derivative transfer")
    primal = solve(r_slave) if solve is not None else sla.cho_solve(sla.cho_factor(M_slave), r_slave)
    return M_master @ (P @ primal)


def measure_gap(face_a: InterfaceFace, face_b: InterfaceFace, n_samples: int = 1000) -> float:
    """Largest distance from sampled points of either face to the other one.

    Points are sampled on a uniform parameter grid with about ``n_samples``
    points per face and projected by point inversion.
    """
    out = 0.0
    for src, dst in ((face_a, face_b), (face_b, face_a)):
        dp = src.geometry.dim_param
        m = max(2, int(round(n_samples ** (1.0 / dp))))
        axes = np.meshgrid(*[np.linspace(0.0, 1.0, m)] * dp, indexing="ij")
        t = np.stack([a.ravel() for a in axes], axis=-1)
        inv = point_inversion(dst, src.geometry(t), tol=0.0)
        out = max(out, float(inv.residual.max()))
    return out
