"""Multipatch interface system: matrix-free Schur complement on the master skeleton.

The unknowns are the trace coefficients on the union of master faces (the
master skeleton).  One application of the interface operator scatters them to
the master faces, interpolates slave traces, solves the local problems,
computes face residuals, moves slave residuals to the master side and gathers
the result back on the skeleton.  The same pipeline with the data switched on
and the skeleton switched off gives the right-hand side, and with both switched
on it recovers the patch solutions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    DIRICHLET,
    Patch,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    correction_matrix,
    dirichlet_coefficients,
    side_flux_matrix,
)
from .coupling import (
    MASTER,
    SLAVE,
    Adjacency,
    CouplingError,
    CouplingOperators,
    InterfacePair,
    build_adjacency,
    build_coupling,
)
from .geometry import point_inversion
from .linalg import KrylovReport, LocalSolver, bicgstab, gmres

__all__ = [
    "MultipatchProblem",
    "SchurSystem",
    "initialize",
    "schur_rhs",
    "schur_apply",
    "recover_solution",
    "dn_preconditioner",
    "assemble_monolithic",
    "solve_monolithic",
    "solve",
    "MultipatchSolution",
]


@dataclass
class MultipatchProblem:
    """Patches plus the master/slave interface pairs that glue them.

    Parameters
    ----------
    patches : list of Patch
    pairs : list of InterfacePair
    name : str
    """

    patches: list
    pairs: list
    name: str = ""

    def __post_init__(self):
        self.pairs = [p if isinstance(p, InterfacePair) else InterfacePair(**p) for p in self.pairs]
        if not self.patches:
            raise CouplingError("a problem needs at least one patch")
        dims = {p.dim for p in self.patches}
        if len(dims) != 1:
            raise CouplingError("all patches must share the same dimension")

    @property
    def diameter(self) -> float:
        pts = np.vstack([p.geometry.control_points for p in self.patches])
        return float(np.linalg.norm(pts.max(0) - pts.min(0)))


@dataclass
class _PatchData:
    patch: Patch
    A: sp.csr_matrix
    f: np.ndarray
    g: np.ndarray
    free: np.ndarray
    A_free: sp.csr_matrix
    local: LocalSolver
    A_hat: dict
    closure: dict


@dataclass
class SchurSystem:
    """Everything built once by :func:`initialize`.

    Attributes
    ----------
    problem : MultipatchProblem
    adjacency : Adjacency
    coupling : CouplingOperators
    data : list of per-patch matrices, loads and factorizations
    skeleton : dict master face -> ndarray of int
        Skeleton index of every trace function of the face (``-1`` when the
        function is Dirichlet or belongs to a slave face of the same patch).
    n_gamma : int
    skeleton_coords : ndarray (n_gamma, d)
        Physical location (Greville point) of each skeleton unknown.
    """

    problem: MultipatchProblem
    adjacency: Adjacency
    coupling: CouplingOperators
    data: list
    skeleton: dict
    n_gamma: int
    skeleton_coords: np.ndarray
    Q: dict = field(default_factory=dict)
    masters: list = field(default_factory=list)
    slaves: list = field(default_factory=list)
    n_applies: int = 0

    @property
    def patches(self) -> list:
        return self.problem.patches


def _skeleton_map(problem: MultipatchProblem, adj: Adjacency, masters, tol):
    """Skeleton numbering; patch vertices are matched across patches by position."""
    index = {}
    coords = []
    vertex_pos = []
    vertex_idx = []
    slave_dofs = {}
    for key in adj.slaves:
        slave_dofs.setdefault(key[0], set()).update(adj.faces[key].dofs.tolist())
    out = {}
    for key in masters:
        k, side = key
        patch = problem.patches[k]
        face = adj.faces[key]
        dirichlet = set(patch.partition.dirichlet.tolist())
        excluded = dirichlet | slave_dofs.get(k, set())
        basis = patch.geometry.basis
        shape = np.array(basis.shape)
        multi = basis.unravel(face.dofs)
        is_vertex = np.all((multi == 0) | (multi == shape - 1), axis=1)
        ids = np.full(face.n, -1, dtype=int)
        for j, dof in enumerate(face.dofs.tolist()):
            if dof in excluded:
                continue
            x = face.greville_phys[j]
            if is_vertex[j]:
                hit = None
                if vertex_pos:
                    d = np.linalg.norm(np.asarray(vertex_pos) - x, axis=1)
                    if d.min() <= tol:
                        hit = vertex_idx[int(np.argmin(d))]
                if hit is None:
                    hit = len(coords)
                    coords.append(x)
                    vertex_pos.append(x)
                    vertex_idx.append(hit)
                index[k, dof] = hit
            elif (k, dof) not in index:
                index[k, dof] = len(coords)
                coords.append(x)
            ids[j] = index[k, dof]
        out[key] = ids
    dim = problem.patches[0].dim
    return out, len(coords), np.asarray(coords, dtype=float).reshape(-1, dim)


def initialize(problem: MultipatchProblem, nq=None, node_tol: float | None = None) -> SchurSystem:
    """Assemble and factor every patch and build all intergrid operators.

    Parameters
    ----------
    problem : MultipatchProblem
    nq : int, optional
        Gauss points per element and direction (default ``p + 1``).
    node_tol : float, optional
        Matching tolerance for interface nodes and skeleton vertices
        (default ``1e-8`` times the domain diameter).
    """
    tol = 1e-8 * problem.diameter if node_tol is None else node_tol
    adj = build_adjacency(problem.patches, problem.pairs, tol)
    coupling = build_coupling(problem.patches, adj, nq)
    data = []
    for k, patch in enumerate(problem.patches):
        A = assemble_stiffness(patch, nq)
        f = assemble_load(patch, nq)
        part = patch.partition
        flux = {s: side_flux_matrix(patch, s, nq) for s in patch.sides
                if patch.tags[s] != "neumann"}
        A_hat, closure = {}, {}
        for side, rows in part.closure.items():
            C = correction_matrix(patch, side, nq, flux=flux)
            A_hat[side] = (A + C)[rows].tocsr()
            closure[side] = rows
        free = part.free
        A_free = A[free].tocsr()
        local = LocalSolver(A_free[:, free], symmetric=not patch.spec.has_advection or None)
        data.append(_PatchData(patch, A, f, dirichlet_coefficients(patch), free, A_free, local,
                               A_hat, closure))
    masters = sorted(adj.masters)
    slaves = sorted(adj.slaves)
    skeleton, n_gamma, coords = _skeleton_map(problem, adj, masters, tol)
    Q = {}
    for m in masters:
        for s in adj.neighbours[m]:
            Q[m, s] = coupling.Q_master_slave(m, s)
    return SchurSystem(problem, adj, coupling, data, skeleton, n_gamma, coords, Q, masters, slaves)


def _distribute(system: SchurSystem, lam, with_data: bool) -> list:
    """Patch vectors holding skeleton values, Dirichlet data and slave traces."""
    traces = []
    for d in system.data:
        t = np.zeros(d.patch.n_dofs)
        if with_data:
            dofs = d.patch.partition.dirichlet
            t[dofs] = d.g[dofs]
        traces.append(t)
    if lam is not None:
        for key in system.masters:
            ids = system.skeleton[key]
            pos = ids >= 0
            face = system.adjacency.faces[key]
            traces[key[0]][face.dofs[pos]] = lam[ids[pos]]
    faces = system.adjacency.faces
    P = system.coupling.P
    # a slave trace may read a master face whose edge lies on another slave
    # face; repeat until nothing changes
    for _ in range(len(system.slaves) + 1):
        changed = False
        for s in system.slaves:
            face = faces[s]
            new = np.zeros(face.n)
            for m in system.adjacency.neighbours[s]:
                new += P[s, m] @ traces[m[0]][faces[m].dofs]
            t = traces[s[0]]
            if not np.array_equal(t[face.dofs], new):
                t[face.dofs] = new
                changed = True
        if not changed:
            break
    return traces


def _local_solves(system: SchurSystem, traces, with_load: bool) -> list:
    out = []
    for d, t in zip(system.data, traces):
        u = t.copy()
        if d.free.size:
            rhs = -(d.A_free @ t)
            if with_load:
                rhs += d.f[d.free]
            u[d.free] = d.local.solve(rhs)
        out.append(u)
    return out


def _gather(system: SchurSystem, sols, with_load: bool) -> np.ndarray:
    res = {}
    for k, (d, u) in enumerate(zip(system.data, sols)):
        for side, Ah in d.A_hat.items():
            r = Ah @ u
            if with_load:
                r = r - d.f[d.closure[side]]
            res[k, side] = r
    psi = np.zeros(system.n_gamma)
    for m in system.masters:
        v = res[m].copy()
        for s in system.adjacency.neighbours[m]:
            v += system.Q[m, s] @ res[s]
        ids = system.skeleton[m]
        pos = ids >= 0
        np.add.at(psi, ids[pos], v[pos])
    return psi


def schur_rhs(system: SchurSystem) -> np.ndarray:
    """Right-hand side of the skeleton system.

    The pipeline with zero skeleton values, Dirichlet data and loads yields
    the residual of the interface equations at ``u_Gamma = 0``; the
    right-hand side is its negative.
    """
    traces = _distribute(system, None, with_data=True)
    sols = _local_solves(system, traces, with_load=True)
    return -_gather(system, sols, with_load=True)


def schur_apply(system: SchurSystem, lam) -> np.ndarray:
    """Interface operator ``S lambda`` with homogeneous data."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (system.n_gamma,):
        raise ValueError(f"expected a skeleton vector of size {system.n_gamma}, got {lam.shape}")
    system.n_applies += 1
    traces = _distribute(system, lam, with_data=False)
    sols = _local_solves(system, traces, with_load=False)
    return _gather(system, sols, with_load=False)


def recover_solution(system: SchurSystem, u_gamma) -> list:
    """Patch coefficient vectors from the skeleton solution."""
    u_gamma = np.asarray(u_gamma, dtype=float)
    if u_gamma.shape != (system.n_gamma,):
        raise ValueError(f"expected a skeleton vector of size {system.n_gamma}")
    traces = _distribute(system, u_gamma, with_data=True)
    return _local_solves(system, traces, with_load=True)


def _master_patches(system: SchurSystem):
    roles = {}
    for key, face in system.adjacency.faces.items():
        roles.setdefault(key[0], set()).add(face.role)
    mixed = sorted(k for k, r in roles.items() if len(r) > 1)
    if mixed:
        raise CouplingError(
            f"patches {mixed} carry both master and slave faces; the Dirichlet-Neumann "
            "preconditioner is not defined for them")
    return sorted(k for k, r in roles.items() if r == {MASTER})


def dn_preconditioner(system: SchurSystem, shift: float = 1.0):
    """Dirichlet-Neumann type preconditioner ``U^{-1} sum_k R_k^T S_k^{-1} R_k``.

    ``S_k`` is the Schur complement of master patch ``k`` on its own skeleton
    dofs, built from the same rows ``A + C`` as the interface residuals.  It is
    applied through one sparse block solve per patch.  Patches without
    Dirichlet boundary get ``shift`` times the mass matrix added.

    Raises
    ------
    CouplingError
        If some patch has both master and slave faces.
    """
    blocks = []
    mult = np.zeros(system.n_gamma)
    for k in _master_patches(system):
        d = system.data[k]
        patch = d.patch
        A = d.A
        if patch.partition.dirichlet.size == 0:
            A = (A + shift * assemble_mass(patch)).tocsr()
        local_dofs, local_ids = [], []
        for key in system.masters:
            if key[0] != k:
                continue
            ids = system.skeleton[key]
            for dof, i in zip(system.adjacency.faces[key].dofs, ids):
                if i >= 0 and i not in local_ids:
                    local_dofs.append(int(dof))
                    local_ids.append(int(i))
        local_dofs = np.asarray(local_dofs, dtype=int)
        local_ids = np.asarray(local_ids, dtype=int)
        row_of = {dof: j for j, dof in enumerate(local_dofs.tolist())}
        H = sp.lil_matrix((local_dofs.size, patch.n_dofs))
        for key in system.masters:
            if key[0] != k:
                continue
            side = key[1]
            rows = d.closure[side]
            Ah = d.A_hat[side] + (A - d.A)[rows]
            ids = system.skeleton[key]
            for j, dof in enumerate(rows.tolist()):
                if ids[j] >= 0:
                    H[row_of[dof]] = H[row_of[dof]] + Ah[j]
        H = H.tocsr()
        cols = np.concatenate([d.free, local_dofs])
        K = sp.vstack([A[d.free][:, cols], H[:, cols]]).tocsc()
        blocks.append((spla.splu(K), d.free.size, local_ids))
        mult[local_ids] += 1.0
    if np.any(mult == 0):
        raise CouplingError("some skeleton dofs belong to no master patch")

    def apply(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for lu, nf, ids in blocks:
            rhs = np.zeros(nf + ids.size)
            rhs[nf:] = v[ids]
            out[ids] += lu.solve(rhs)[nf:]
        return out / mult

    apply.multiplicity = mult
    return apply


def assemble_monolithic(system: SchurSystem):
    """Block system in the unknowns ``(u0_1, u0_2, u_Gamma)`` for a two-patch problem.

    The master patch trace on the interface is the skeleton (plus Dirichlet
    values at its ends); the slave trace is its interpolant; the skeleton rows
    impose the balance of master residual and transferred slave residual.

    Returns
    -------
    K : scipy.sparse.csr_matrix
    rhs : ndarray
    layout : dict
        ``free`` (per patch), ``offsets`` and the affine maps used to expand a
        block solution into patch coefficient vectors.
    """
    if len(system.patches) != 2 or len(system.masters) != 1 or len(system.slaves) != 1:
        raise CouplingError("the monolithic system needs two patches and one interface")
    m, s = system.masters[0], system.slaves[0]
    faces = system.adjacency.faces
    dm, ds = system.data[m[0]], system.data[s[0]]
    ids = system.skeleton[m]
    pos = ids >= 0
    nf1, nf2, ng = dm.free.size, ds.free.size, system.n_gamma
    n = nf1 + nf2 + ng

    def lift(d):
        c = np.zeros(d.patch.n_dofs)
        dofs = d.patch.partition.dirichlet
        c[dofs] = d.g[dofs]
        return c

    # master patch: u1 = T1 z + c1
    T1 = sp.lil_matrix((dm.patch.n_dofs, n))
    T1[dm.free, np.arange(nf1)] = 1.0
    T1[faces[m].dofs[pos], nf1 + nf2 + ids[pos]] = 1.0
    c1 = lift(dm)
    T1 = T1.tocsr()
    # slave patch: free part plus interpolated master trace
    P = system.coupling.P[s, m]
    T2 = sp.lil_matrix((ds.patch.n_dofs, n))
    T2[ds.free, nf1 + np.arange(nf2)] = 1.0
    T2 = T2.tocsr()
    trace_map = T1[faces[m].dofs]
    S2 = sp.csr_matrix((np.ones(faces[s].n), (faces[s].dofs, np.arange(faces[s].n))),
                       shape=(ds.patch.n_dofs, faces[s].n))
    T2 = (T2 + S2 @ sp.csr_matrix(P @ trace_map.toarray())).tocsr()
    c2 = lift(ds)
    c2[faces[s].dofs] = P @ c1[faces[m].dofs]
    Q = system.Q[m, s]
    Ah1, Ah2 = dm.A_hat[m[1]], ds.A_hat[s[1]]
    r1 = dm.f[dm.closure[m[1]]]
    r2 = ds.f[ds.closure[s[1]]]
    rows_g = Ah1 @ T1 + sp.csr_matrix(Q) @ (Ah2 @ T2)
    rhs_g = r1 + Q @ r2 - Ah1 @ c1 - Q @ (Ah2 @ c2)
    G = sp.csr_matrix((np.ones(pos.sum()), (ids[pos], np.flatnonzero(pos))),
                      shape=(ng, faces[m].n))
    K = sp.vstack([dm.A_free @ T1, ds.A_free @ T2, G @ rows_g]).tocsr()
    rhs = np.concatenate([dm.f[dm.free] - dm.A_free @ c1,
                          ds.f[ds.free] - ds.A_free @ c2,
                          G @ rhs_g])
    layout = {"maps": {m[0]: (T1, c1), s[0]: (T2, c2)}, "n": n}
    return K, rhs, layout


def solve_monolithic(system: SchurSystem) -> list:
    """Direct solve of :func:`assemble_monolithic`; returns patch coefficient vectors."""
    K, rhs, layout = assemble_monolithic(system)
    z = spla.spsolve(K.tocsc(), rhs)
    return [layout["maps"][k][0] @ z + layout["maps"][k][1] for k in range(2)]


@dataclass
class MultipatchSolution:
    """Patch coefficient vectors and the way they were obtained."""

    problem: MultipatchProblem
    coefficients: list
    report: KrylovReport | None = None
    u_gamma: np.ndarray | None = None

    def evaluate(self, x, patch: int | None = None) -> np.ndarray:
        """Discrete solution at physical points.

        Each point is located by volume point inversion in the first patch that
        contains it (or in ``patch`` when given); points outside every patch get NaN.
        """
        from .geometry import eval_nurbs

        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(x.shape[0], np.nan)
        todo = np.ones(x.shape[0], dtype=bool)
        ks = range(len(self.problem.patches)) if patch is None else [patch]
        for k in ks:
            if not np.any(todo):
                break
            geo = self.problem.patches[k].geometry
            sel = np.flatnonzero(todo)
            inv = point_inversion(geo, x[sel], tol=1e-9 * geo.diameter)
            hit = sel[inv.success]
            if hit.size:
                idx, R, _ = eval_nurbs(geo.space, inv.xi[inv.success], gradients=False)
                out[hit] = np.sum(R * self.coefficients[k][idx], axis=1)
                todo[hit] = False
        return out


def solve(system: SchurSystem, method: str = "bicgstab", tol: float = 1e-10, max_it: int = 500,
          precond: str = "none", restart: int = 30) -> MultipatchSolution:
    """Solve the skeleton system and recover the patch solutions.

    Parameters
    ----------
    method : {'bicgstab', 'gmres', 'monolithic'}
    precond : {'none', 'dn', 'local_schur'}
        ``'local_schur'`` is the same operator as ``'dn'``; with a single
        master patch it is that patch's Schur complement.
    """
    method = method.lower()
    if method == "monolithic":
        return MultipatchSolution(system.problem, solve_monolithic(system))
    if precond not in ("none", "dn", "local_schur"):
        raise ValueError(f"unknown preconditioner {precond!r}")
    M = dn_preconditioner(system) if precond != "none" else None
    b = schur_rhs(system)
    op = lambda v: schur_apply(system, v)  # noqa: E731
    if method == "bicgstab":
        x, rep = bicgstab(op, b, M, tol=tol, max_it=max_it)
    elif method == "gmres":
        x, rep = gmres(op, b, M, tol=tol, max_it=max_it, restart=restart)
    else:
        raise ValueError(f"unknown solver {method!r}")
    return MultipatchSolution(system.problem, recover_solution(system, x), rep, x)
