"""Experiment runner: errors, single runs, sweeps, rate fits and report files."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .assembly import volume_quadrature
from .cases import BuiltCase, builtin_cases
from .coupling import measure_gap
from .geometry import eval_nurbs
from .linalg import KrylovReport
from .schur import MultipatchProblem, initialize, solve

__all__ = [
    "SolverSettings",
    "RunConfig",
    "RunReport",
    "patch_errors",
    "broken_error",
    "mesh_size",
    "fit_rate",
    "run_case",
    "run_sweep",
    "CSV_COLUMNS",
    "reports_to_csv",
    "solution_grid_csv",
]

CSV_COLUMNS = ("case", "p", "nbar", "h", "dofs", "err_broken", "its", "converged", "d_gamma",
               "seconds")


@dataclass
class SolverSettings:
    """Interface solver choice; ``precond=None`` takes the case default."""

    method: str = "bicgstab"
    tol: float = 1e-10
    max_it: int = 500
    precond: str | None = None


@dataclass
class RunConfig:
    """One experiment: a named case (or an already built one) at one resolution."""

    case: str = "t1_balanced"
    p: object = None
    nbar: int | None = None
    options: dict = field(default_factory=dict)
    solver: SolverSettings = field(default_factory=SolverSettings)
    built: BuiltCase | None = None

    def build(self) -> BuiltCase:
        if self.built is not None:
            return self.built
        cases = builtin_cases()
        if self.case not in cases:
            raise KeyError(f"unknown case {self.case!r}")
        return cases[self.case](self.nbar, self.p, **self.options)


@dataclass
class RunReport:
    """Outcome of :func:`run_case`.

    ``err_broken`` is the root-sum-square of ``patch_errors``; it is NaN when
    the case has no exact solution.  ``error`` names the failing stage.
    """

    case: str
    p: object
    nbar: int | None
    h: float = math.nan
    dofs: int = 0
    err_broken: float = math.nan
    patch_errors: list = field(default_factory=list)
    krylov: KrylovReport | None = None
    d_gamma: float = 0.0
    seconds: float = 0.0
    error: str = ""
    solution: object = None

    @property
    def its(self) -> int:
        return self.krylov.iterations if self.krylov is not None else 0

    @property
    def converged(self) -> bool:
        if self.error:
            return False
        return self.krylov.converged if self.krylov is not None else True

    def row(self, timing: bool = True) -> dict:
        p = self.p if np.isscalar(self.p) or self.p is None else "-".join(map(str, self.p))
        return {
            "case": self.case, "p": p, "nbar": self.nbar, "h": f"{self.h:.6e}",
            "dofs": self.dofs, "err_broken": f"{self.err_broken:.6e}", "its": self.its,
            "converged": int(self.converged), "d_gamma": f"{self.d_gamma:.6e}",
            "seconds": f"{self.seconds:.3f}" if timing else "0",
        }


def patch_errors(problem: MultipatchProblem, coefficients, exact, extra_points: int | None = None):
    """Relative ``H^1`` error of every patch.

    Quadrature uses ``2 (p + 1)`` Gauss points per element and direction unless
    ``extra_points`` overrides the count.

    Raises
    ------
    ValueError
        If the exact solution has zero ``H^1`` norm on some patch.
    """
    out = []
    for k, (patch, c) in enumerate(zip(problem.patches, coefficients)):
        geo = patch.geometry
        nq = tuple(2 * (p + 1) for p in geo.degrees) if extra_points is None else extra_points
        q = volume_quadrature(geo, nq)
        E, Q, L, d = q.grad.shape
        x = q.x.reshape(E * Q, d)
        w = q.w.reshape(E * Q)
        cl = c[q.idx]  # (E, L)
        uh = np.einsum("eql,el->eq", q.R, cl).reshape(E * Q)
        guh = np.einsum("eqld,el->eqd", q.grad, cl).reshape(E * Q, d)
        u = exact.u(x)
        gu = exact.grad(x)
        num = np.sum(w * ((u - uh) ** 2 + np.sum((gu - guh) ** 2, axis=1)))
        den = np.sum(w * (u ** 2 + np.sum(gu ** 2, axis=1)))
        if den == 0.0:
            raise ValueError(f"exact solution vanishes on patch {k}; relative error undefined")
        out.append(math.sqrt(num / den))
    return out


def broken_error(problem: MultipatchProblem, coefficients, exact, extra_points=None) -> float:
    """``sqrt(sum_k |u_h - u|^2_{H1(k)} / |u|^2_{H1(k)})``."""
    return math.sqrt(sum(e * e for e in patch_errors(problem, coefficients, exact, extra_points)))


def mesh_size(problem: MultipatchProblem) -> float:
    """``h = max_k h_k`` with ``h_k`` the largest element diameter of patch ``k``."""
    return max(p.geometry.mesh_size() for p in problem.patches)


def fit_rate(h, err, fraction: float = 0.5):
    """Least-squares slope of ``log err`` against ``log h`` over the finest points.

    Returns
    -------
    slope : float
    interval : tuple of float
        95% confidence interval (NaN with fewer than three points).
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = np.isfinite(h) & np.isfinite(err) & (err > 0)
    h, err = h[ok], err[ok]
    if h.size < 2:
        raise ValueError("need at least two valid points to fit a rate")
    order = np.argsort(h)
    m = max(2, math.ceil(fraction * h.size))
    sel = order[:m]
    fit = stats.linregress(np.log(h[sel]), np.log(err[sel]))
    if m > 2:
        t = stats.t.ppf(0.975, m - 2)
        ci = (fit.slope - t * fit.stderr, fit.slope + t * fit.stderr)
    else:
        ci = (math.nan, math.nan)
    return float(fit.slope), ci


def run_case(config: RunConfig) -> RunReport:
    """Build, solve and measure one configuration.

    Failures are caught and recorded in ``RunReport.error`` as
    ``"<stage>: <message>"``; stages are build, initialize, solve and error.
    """
    rep = RunReport(config.case, config.p, config.nbar)
    t0 = time.perf_counter()
    stage = "build"
    try:
        built = config.build()
        prob = built.problem
        rep.p = config.p if config.p is not None else _degrees_of(prob)
        if rep.nbar is None and config.built is None:
            rep.nbar = builtin_cases()[config.case].default_nbars[0]
        rep.h = mesh_size(prob)
        rep.dofs = sum(p.n_dofs for p in prob.patches)
        stage = "initialize"
        system = initialize(prob)
        faces = system.adjacency.faces
        if built.gap_pairs:
            rep.d_gamma = max(measure_gap(faces[a], faces[b]) for a, b in built.gap_pairs)
        stage = "solve"
        s = config.solver
        precond = s.precond if s.precond is not None else built.precond
        sol = solve(system, method=s.method, tol=s.tol, max_it=s.max_it, precond=precond)
        rep.krylov = sol.report
        rep.solution = sol
        if built.exact is not None:
            stage = "error"
            rep.patch_errors = patch_errors(prob, sol.coefficients, built.exact)
            rep.err_broken = math.sqrt(sum(e * e for e in rep.patch_errors))
    except Exception as exc:  # recorded, the sweep goes on
        rep.error = f"{stage}: {type(exc).__name__}: {exc}"
    rep.seconds = time.perf_counter() - t0
    return rep


def _degrees_of(problem):
    degs = list(dict.fromkeys(max(p.geometry.degrees) for p in problem.patches))
    return degs[0] if len(degs) == 1 else tuple(degs)


def run_sweep(config: RunConfig, ps, nbars, keep_solutions: bool = False):
    """Run ``config`` for every ``(p, nbar)`` and fit one rate per degree.

    Returns
    -------
    reports : list of RunReport
        In sweep order (degree-major).
    rates : dict p -> (slope, interval)
        Degrees with fewer than two valid points are omitted.
    """
    reports, rates = [], {}
    for p in ps:
        block = []
        for n in nbars:
            cfg = RunConfig(config.case, p, n, dict(config.options), config.solver)
            rep = run_case(cfg)
            if not keep_solutions:
                rep.solution = None
            block.append(rep)
        reports.extend(block)
        h = [r.h for r in block if not r.error]
        e = [r.err_broken for r in block if not r.error]
        try:
            rates[p] = fit_rate(h, e)
        except ValueError:
            pass
    return reports, rates


def reports_to_csv(reports, timing: bool = True) -> str:
    """CSV text with the fixed column set."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row(timing))
    return buf.getvalue()


def solution_grid_csv(solution, density: int = 2) -> str:
    """Samples of the discrete solution on a uniform parameter grid of every patch.

    The grid has ``density`` times as many points per direction as the patch
    has basis functions.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = solution.problem.patches[0].dim
    w.writerow(["patch"] + [f"xi{j}" for j in range(dim)] + ["x", "y", "z"][:dim] + ["u_h"])
    for k, (patch, c) in enumerate(zip(solution.problem.patches, solution.coefficients)):
        geo = patch.geometry
        axes = [np.linspace(0.0, 1.0, density * n) for n in geo.shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        xi = np.stack([m.ravel(order="F") for m in mesh], axis=-1)
        x = geo(xi)
        idx, R, _ = eval_nurbs(geo.space, xi, gradients=False)
        u = np.sum(R * c[idx], axis=1)
        for a, b, v in zip(xi, x, u):
            w.writerow([k] + [f"{t:.6f}" for t in a] + [f"{t:.9e}" for t in b] + [f"{v:.9e}"])
    return buf.getvalue()
