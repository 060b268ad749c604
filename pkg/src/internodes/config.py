"""YAML experiment configurations.

A configuration either names a built-in case::

    case: t1_balanced
    p: 2
    nbar: 8
    options: {}
    solver: {method: bicgstab, tol: 1.0e-10, max_it: 500, precond: local_schur}

or spells the multipatch problem out explicitly::

    name: my_problem
    patches:
      - geometry: {degrees: [..], knots: [[..], [..]], weights: [..], control_points: [[..], ..]}
        refine: {degrees: [2, 2], scale: [1, 2]}   # optional
        tags: {u0: dirichlet, u1: interface, v0: dirichlet, v1: dirichlet}
        nu: 1.0
        alpha: 0.0
    interfaces:
      - {master: [0, u1], slave: [1, u0], watertight: true}
    exact: {name: t1_sine, params: {}}     # or omit and give `source`
    source: 1.0
    dirichlet: 0.0
    precond: local_schur

The ``geometry`` block is the plain-data form of :func:`geometry_to_dict`
(control points in linear index order, first direction fastest).  ``refine``
elevates to ``degrees`` and inserts uniform knots: either a fixed ``n_el`` per
direction or ``scale`` factors so that ``n_el = max(1, round(scale * nbar))``.
A sweep degree ``p`` overrides ``refine.degrees``.  Coefficients are constants
per patch, and exact solutions are chosen by name from
:data:`~internodes.cases.EXACT_SOLUTIONS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .assembly import Patch, ProblemSpec
from .cases import BuiltCase, builtin_cases, exact_solution
from .coupling import InterfacePair
from .geometry import geometry_from_dict, geometry_to_dict, refine
from .harness import RunConfig, SolverSettings
from .schur import MultipatchProblem

__all__ = ["ConfigError", "CaseConfig", "parse_config", "load_config", "build_explicit",
           "case_to_config", "dump_config"]

_SOLVER_KEYS = {"method", "tol", "max_it", "precond"}
_METHODS = ("bicgstab", "gmres", "monolithic")
_PRECONDS = ("none", "dn", "local_schur")


class ConfigError(ValueError):
    """The configuration document is malformed or inconsistent."""


@dataclass
class CaseConfig:
    """Validated configuration document.

    Attributes
    ----------
    name : str
    case : str or None
        Built-in case name; ``None`` for explicit problems.
    p, nbar : optional
        Resolution handed to the builder (or to ``refine`` blocks).
    nbars : tuple of int or None
        Sweep resolutions when the document lists several ``nbar`` values;
        ``nbar`` is then the first of them.
    options : dict
        Extra keyword arguments of the built-in builder.
    explicit : dict or None
        The explicit problem description (patches, interfaces, ...).
    solver : SolverSettings
    output : dict
        ``dir`` and ``grid_density``.
    raw : dict
        The document as read, echoed into ``meta.txt``.
    """

    name: str
    case: str | None = None
    p: object = None
    nbar: int | None = None
    options: dict = field(default_factory=dict)
    explicit: dict | None = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    nbars: tuple | None = None

    def run_config(self, p=None, nbar=None) -> RunConfig:
        """A :class:`RunConfig` at the given (or configured) resolution."""
        p = self.p if p is None else p
        nbar = self.nbar if nbar is None else nbar
        if self.case is not None:
            return RunConfig(self.case, p, nbar, dict(self.options), self.solver)
        built = build_explicit(self.explicit, p, nbar)
        return RunConfig(self.name, p, nbar, {}, self.solver, built)


def _nbar(value):
    """``(nbar, nbars)`` from a scalar or a list entry."""
    if value is None:
        return None, None
    values = value if isinstance(value, list) else [value]
    if not values or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in values):
        raise ConfigError(f"nbar must be a positive integer or a list of them, got {value!r}")
    return values[0], (tuple(values) if isinstance(value, list) else None)


def _solver(data) -> SolverSettings:
    if data is None:
        return SolverSettings()
    if not isinstance(data, dict):
        raise ConfigError("'solver' must be a mapping")
    unknown = set(data) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys {sorted(unknown)}")
    s = SolverSettings(**data)
    if s.method not in _METHODS:
        raise ConfigError(f"solver.method must be one of {_METHODS}, got {s.method!r}")
    if s.precond is not None and s.precond not in _PRECONDS:
        raise ConfigError(f"solver.precond must be one of {_PRECONDS}, got {s.precond!r}")
    try:
        s.tol, s.max_it = float(s.tol), int(s.max_it)
    except (TypeError, ValueError):
        raise ConfigError("solver.tol and solver.max_it must be numbers") from None
    if not (s.tol > 0 and s.max_it > 0):
        raise ConfigError("solver.tol and solver.max_it must be positive")
    return s


def parse_config(data: dict) -> CaseConfig:
    """Validate a configuration mapping.

    Raises
    ------
    ConfigError
        On unknown cases, missing fields or malformed solver settings.
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    solver = _solver(data.get("solver"))
    output = dict(data.get("output") or {})
    output.setdefault("grid_density", 2)
    p = data.get("p")
    if isinstance(p, list):
        p = tuple(int(v) for v in p)
    nbar, nbars = _nbar(data.get("nbar"))
    if "case" in data and "patches" in data:
        raise ConfigError("give either 'case' or 'patches', not both")
    if "case" in data:
        name = data["case"]
        if name not in builtin_cases():
            raise ConfigError(f"unknown case {name!r}; see `internodes list-cases`")
        return CaseConfig(data.get("name", name), name, p, nbar, dict(data.get("options") or {}),
                          None, solver, output, data, nbars)
    if "patches" not in data:
        raise ConfigError("configuration needs 'case' or 'patches'")
    explicit = {k: data.get(k) for k in ("patches", "interfaces", "exact", "source", "dirichlet",
                                         "neumann", "precond", "gap_pairs")}
    cfg = CaseConfig(data.get("name", "explicit"), None, p, nbar, {}, explicit, solver, output, data,
                     nbars)
    build_explicit(explicit, p, nbar)  # validate eagerly
    return cfg


def load_config(source) -> CaseConfig:
    """Read and validate a YAML file (path) or YAML text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).suffix in (".yaml", ".yml")):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"configuration file {path} not found")
        text = path.read_text()
    else:
        text = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return parse_config(data)


def _face(entry):
    if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
        raise ConfigError(f"interface faces are [patch, side] pairs, got {entry!r}")
    return int(entry[0]), str(entry[1])


def _refine_block(geo, block, p, nbar, k):
    degrees = block.get("degrees")
    if p is not None:
        degrees = [int(p)] * geo.dim_param if np.isscalar(p) else [int(v) for v in p]
    n_el = block.get("n_el")
    if "scale" in block:
        if nbar is None:
            raise ConfigError(f"patch {k}: refine.scale needs 'nbar'")
        n_el = [max(1, int(round(float(s) * nbar))) for s in block["scale"]]
    try:
        return refine(geo, degrees=degrees, n_el=n_el)
    except ValueError as exc:
        raise ConfigError(f"patch {k}: {exc}") from None


def build_explicit(data: dict, p=None, nbar=None) -> BuiltCase:
    """Build a :class:`BuiltCase` from the explicit part of a configuration.

    ``p`` may be a single degree or one degree per patch.
    """
    patches_in = data.get("patches") or []
    if not patches_in:
        raise ConfigError("'patches' must be a non-empty list")
    exact = None
    if data.get("exact"):
        ex = data["exact"]
        ex = {"name": ex} if isinstance(ex, str) else ex
        try:
            exact = exact_solution(ex["name"], **(ex.get("params") or {}))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"exact solution: {exc}") from None
    source = data.get("source")
    dirichlet = float(data.get("dirichlet") or 0.0)
    neumann = float(data.get("neumann") or 0.0)
    per_patch_p = isinstance(p, (list, tuple))
    if per_patch_p and len(p) != len(patches_in):
        raise ConfigError("a per-patch degree list needs one entry per patch")
    patches, coefs = [], []
    for k, entry in enumerate(patches_in):
        try:
            geo = geometry_from_dict(entry["geometry"])
            tags = entry["tags"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"patch {k}: {exc}") from None
        pk = p[k] if per_patch_p else p
        if entry.get("refine") or pk is not None:
            geo = _refine_block(geo, entry.get("refine") or {}, pk, nbar, k)
        nu, alpha = float(entry.get("nu", 1.0)), float(entry.get("alpha", 0.0))
        if exact is not None:
            spec = ProblemSpec(nu=nu, alpha=alpha, f=exact.source(nu, alpha), g=exact.u,
                               neumann=neumann)
        else:
            spec = ProblemSpec(nu=nu, alpha=alpha, f=float(source or 0.0), g=dirichlet,
                               neumann=neumann)
        try:
            patches.append(Patch(geo, tags, spec, entry.get("name", f"patch{k}")))
        except ValueError as exc:
            raise ConfigError(f"patch {k}: {exc}") from None
        coefs.append({"nu": nu, "alpha": alpha})
    pairs = []
    for j, item in enumerate(data.get("interfaces") or []):
        try:
            pairs.append(InterfacePair(_face(item["master"]), _face(item["slave"]),
                                       bool(item.get("watertight", True)), item.get("radius")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"interface {j}: {exc}") from None
    for pair in pairs:
        for idx, _ in (pair.master, pair.slave):
            if not 0 <= idx < len(patches):
                raise ConfigError(f"interface refers to patch {idx}, which does not exist")
    if data.get("gap_pairs") is not None:
        gaps = [(_face(a), _face(b)) for a, b in data["gap_pairs"]]
    else:
        gaps = [(pr.master, pr.slave) for pr in pairs if not pr.watertight]
    precond = data.get("precond") or "none"
    if precond not in _PRECONDS:
        raise ConfigError(f"precond must be one of {_PRECONDS}, got {precond!r}")
    problem = MultipatchProblem(patches, pairs, data.get("name", "explicit"))
    return BuiltCase(problem, exact, precond, gaps, coefs,
                     None if exact is not None else float(source or 0.0))


def case_to_config(built: BuiltCase, name: str = "") -> dict:
    """Explicit configuration mapping that rebuilds ``built`` exactly."""
    patches = []
    for k, patch in enumerate(built.problem.patches):
        coef = built.coefficients[k] if k < len(built.coefficients) else {"nu": 1.0, "alpha": 0.0}
        patches.append({
            "name": patch.name or f"patch{k}",
            "geometry": geometry_to_dict(patch.geometry),
            "tags": dict(patch.tags),
            "nu": float(coef["nu"]),
            "alpha": float(coef["alpha"]),
        })
    out = {"name": name or built.problem.name, "patches": patches}
    out["interfaces"] = [
        {"master": list(pr.master), "slave": list(pr.slave), "watertight": pr.watertight,
         **({"radius": float(pr.radius)} if pr.radius is not None else {})}
        for pr in built.problem.pairs
    ]
    if built.exact is not None:
        params = {k: float(v) for k, v in built.exact.params().items()}
        out["exact"] = {"name": built.exact.name, "params": params}
    else:
        out["source"] = float(built.source or 0.0)
    if built.gap_pairs:
        out["gap_pairs"] = [[list(a), list(b)] for a, b in built.gap_pairs]
    out["precond"] = built.precond
    out["solver"] = {"method": "bicgstab", "tol": 1e-10, "max_it": 500}
    return out


def dump_config(data: dict) -> str:
    """YAML text of a configuration mapping (keys in insertion order)."""
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)
