"""INTERNODES coupling for isogeometric analysis on non-conforming multipatch domains.

The public entry points are re-exported here; see the submodules for the
building blocks (B-spline bases, NURBS geometry, assembly, interface coupling,
Schur-complement solvers and the experiment harness).
"""
__version__ = "0.1.0"

from .assembly import Patch, ProblemSpec
from .cases import BuiltCase, builtin_cases, exact_solution, kellogg_parameters
from .config import CaseConfig, ConfigError, load_config
from .coupling import CouplingError, InterfacePair
from .estimator import InternodesSolver
from .geometry import GeometryMap, refine
from .harness import RunConfig, RunReport, SolverSettings, broken_error, run_case, run_sweep
from .linalg import KrylovReport
from .schur import MultipatchProblem, MultipatchSolution, initialize, solve

__all__ = [
    "__version__",
    "Patch",
    "ProblemSpec",
    "BuiltCase",
    "builtin_cases",
    "exact_solution",
    "kellogg_parameters",
    "CaseConfig",
    "ConfigError",
    "load_config",
    "CouplingError",
    "InterfacePair",
    "InternodesSolver",
    "GeometryMap",
    "refine",
    "RunConfig",
    "RunReport",
    "SolverSettings",
    "broken_error",
    "run_case",
    "run_sweep",
    "KrylovReport",
    "MultipatchProblem",
    "MultipatchSolution",
    "initialize",
    "solve",
]
