"""scikit-learn style wrapper around the multipatch solver.

``fit`` solves a boundary-value problem (there is no training data: the
"sample" is the problem itself) and ``predict`` evaluates the discrete
solution at physical points, so the fitted object plugs into code that
expects ``fit``/``predict``/``score`` and ``get_params``/``set_params``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .cases import BuiltCase
from .config import CaseConfig
from .harness import RunConfig, SolverSettings, run_case
from .schur import MultipatchProblem

__all__ = ["InternodesSolver"]


class InternodesSolver(RegressorMixin, BaseEstimator):
    """Solve a multipatch problem and evaluate ``u_h`` like a regressor.

    Parameters
    ----------
    case : str
        Built-in case used when :meth:`fit` receives no problem.
    p, nbar : optional
        Resolution of the built-in case.
    method : {'bicgstab', 'gmres', 'monolithic'}
    tol : float
    max_it : int
    precond : {'none', 'dn', 'local_schur'} or None
        ``None`` takes the case default.
    options : dict or None
        Extra builder options of the built-in case.

    Attributes
    ----------
    solution_ : MultipatchSolution
    report_ : RunReport
    n_patches_ : int
    n_features_in_ : int
        Spatial dimension of the problem.

    Examples
    --------
    >>> est = InternodesSolver("t1_balanced", p=2, nbar=4).fit()
    >>> est.report_.converged
    True
    """

    def __init__(self, case: str = "t1_balanced", p=None, nbar=None, method: str = "bicgstab",
                 tol: float = 1e-10, max_it: int = 500, precond=None, options=None):
        self.case = case
        self.p = p
        self.nbar = nbar
        self.method = method
        self.tol = tol
        self.max_it = max_it
        self.precond = precond
        self.options = options

    def _run_config(self, problem) -> RunConfig:
        settings = SolverSettings(self.method, self.tol, self.max_it, self.precond)
        if problem is None:
            return RunConfig(self.case, self.p, self.nbar, dict(self.options or {}), settings)
        if isinstance(problem, CaseConfig):
            rc = problem.run_config(self.p, self.nbar)
            rc.solver = settings
            return rc
        if isinstance(problem, MultipatchProblem):
            problem = BuiltCase(problem, None)
        if isinstance(problem, BuiltCase):
            return RunConfig(problem.problem.name or "problem", self.p, self.nbar, {}, settings,
                             problem)
        raise TypeError(f"cannot solve an object of type {type(problem).__name__}")

    def fit(self, X=None, y=None):
        """Solve the problem.

        Parameters
        ----------
        X : MultipatchProblem, BuiltCase, CaseConfig or None
            The problem; ``None`` builds ``self.case``.
        y : ignored

        Raises
        ------
        RuntimeError
            If any stage fails or the Krylov solve does not converge.
        """
        rep = run_case(self._run_config(X))
        if rep.error:
            raise RuntimeError(rep.error)
        if not rep.converged:
            raise RuntimeError(f"interface solve did not converge in {rep.its} iterations "
                               f"(residual {rep.krylov.residual:.2e})")
        self.report_ = rep
        self.solution_ = rep.solution
        self.n_patches_ = len(rep.solution.problem.patches)
        self.n_features_in_ = rep.solution.problem.patches[0].dim
        return self

    def predict(self, X) -> np.ndarray:
        """``u_h`` at physical points ``X[m, d]`` (NaN outside the domain)."""
        check_is_fitted(self, "solution_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected points with {self.n_features_in_} coordinates, "
                             f"got {X.shape[1]}")
        return self.solution_.evaluate(X)
