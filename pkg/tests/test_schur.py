import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from internodes.assembly import Patch, ProblemSpec
from internodes.cases import builtin_cases
from internodes.coupling import CouplingError, InterfacePair
from internodes.geometry import make_box, refine
from internodes.schur import (MultipatchProblem, assemble_monolithic, dn_preconditioner,
                              initialize, recover_solution, schur_apply, schur_rhs, solve)

CASES = builtin_cases()


def quadratic(x):
    return x[:, 0] ** 2 - 0.5 * x[:, 1] ** 2 + x[:, 0] * x[:, 1] + 1.0


def quadratic_problem(n_left=(2, 3), n_right=(3, 5), p=2):
    """Two non-conforming boxes sharing x = 1; -lap u = -1 for the quadratic above."""
    spec = ProblemSpec(f=-1.0, g=quadratic)
    left = Patch(refine(make_box([0, 0], [1, 1]), degrees=(p, p), n_el=n_left),
                 {"u0": "d", "u1": "i", "v0": "d", "v1": "d"}, spec)
    right = Patch(refine(make_box([1, 0], [2, 1]), degrees=(p, p), n_el=n_right),
                  {"u0": "i", "u1": "d", "v0": "d", "v1": "d"}, spec)
    return MultipatchProblem([left, right], [InterfacePair((0, "u1"), (1, "u0"))], "quadratic")


@pytest.fixture(scope="module")
def t1_system():
    return initialize(CASES["t1_balanced"](4, 2).problem)


def test_patch_test_on_non_conforming_meshes():
    # quadratics lie in both trace spaces, so the exact solution is reproduced
    system = initialize(quadratic_problem())
    sol = solve(system, tol=1e-13)
    assert sol.report.converged
    x = np.random.default_rng(0).random((40, 2)) * [2, 1]
    np.testing.assert_allclose(sol.evaluate(x), quadratic(x), atol=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_schur_apply_is_linear(t1_system, a, b, seed):
    rng = np.random.default_rng(seed)
    n = t1_system.n_gamma
    x, y = rng.normal(size=n), rng.normal(size=n)
    lhs = schur_apply(t1_system, a * x + b * y)
    rhs = a * schur_apply(t1_system, x) + b * schur_apply(t1_system, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


@pytest.mark.parametrize("name, nbar", [("t1_balanced", 4), ("t1_slave_refined", 4),
                                        ("t1_master_refined", 4), ("t2_nonwatertight", 4)])
def test_schur_matches_monolithic(name, nbar):
    system = initialize(CASES[name](nbar).problem)
    krylov = solve(system, tol=1e-13)
    mono = solve(system, method="monolithic")
    assert krylov.report.converged
    for a, b in zip(krylov.coefficients, mono.coefficients):
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_seven_patches_gmres_matches_bicgstab():
    system = initialize(CASES["t3_ring7"](4).problem)
    a = solve(system, tol=1e-13)
    b = solve(system, method="gmres", tol=1e-13, max_it=400)
    assert a.report.converged and b.report.converged
    np.testing.assert_allclose(np.concatenate(a.coefficients), np.concatenate(b.coefficients),
                               atol=1e-9)
    with pytest.raises(CouplingError, match="two patches"):
        solve(system, method="monolithic")


def test_monolithic_system_shape(t1_system):
    K, rhs, layout = assemble_monolithic(t1_system)
    assert K.shape[0] == K.shape[1] == rhs.size


@pytest.mark.parametrize("method", ["bicgstab", "gmres"])
def test_krylov_methods_agree(t1_system, method):
    sol = solve(t1_system, method=method, tol=1e-12)
    ref = solve(t1_system, method="monolithic")
    assert sol.report.method == method and sol.report.converged
    np.testing.assert_allclose(np.concatenate(sol.coefficients),
                               np.concatenate(ref.coefficients), atol=1e-9)


def test_rhs_and_recovery_are_consistent(t1_system):
    sol = solve(t1_system, tol=1e-13)
    residual = schur_apply(t1_system, sol.u_gamma) - schur_rhs(t1_system)
    assert np.linalg.norm(residual) <= 1e-12 * np.linalg.norm(schur_rhs(t1_system))
    again = recover_solution(t1_system, sol.u_gamma)
    for a, b in zip(again, sol.coefficients):
        np.testing.assert_array_equal(a, b)


def test_dn_preconditioner_cuts_iterations():
    system = initialize(CASES["t4_kellogg"](10).problem)
    plain = solve(system, tol=1e-10, max_it=400)
    dn = solve(system, tol=1e-10, precond="dn")
    assert dn.report.converged
    assert dn.report.iterations < plain.report.iterations
    apply = dn_preconditioner(system)
    assert apply(np.zeros(system.n_gamma)).shape == (system.n_gamma,)


def test_dn_rejects_patches_with_both_roles():
    system = initialize(CASES["t3_ring7"](4).problem)
    with pytest.raises(CouplingError, match="both master and slave"):
        dn_preconditioner(system)


def test_unknown_options_rejected(t1_system):
    with pytest.raises(ValueError):
        solve(t1_system, method="cg")
    with pytest.raises(ValueError):
        solve(t1_system, precond="ilu")


def test_runs_are_deterministic():
    reports = []
    for _ in range(2):
        system = initialize(CASES["t2_nonwatertight"](4).problem)
        sol = solve(system, precond="local_schur")
        reports.append((sol.report, np.concatenate(sol.coefficients)))
    assert reports[0][0] == reports[1][0]
    assert np.array_equal(reports[0][1], reports[1][1])


def test_evaluate_outside_domain_is_nan(t1_system):
    sol = solve(t1_system)
    vals = sol.evaluate(np.array([[0.0, 0.0], [1.5, 0.5]]))
    assert np.isnan(vals[0]) and np.isfinite(vals[1])


def test_problem_validation():
    with pytest.raises(CouplingError):
        MultipatchProblem([], [])
    box2 = Patch(make_box([0, 0], [1, 1]), {s: "d" for s in ("u0", "u1", "v0", "v1")})
    box3 = Patch(make_box([0, 0, 0], [1, 1, 1]),
                 {s: "d" for s in ("u0", "u1", "v0", "v1", "w0", "w1")})
    with pytest.raises(CouplingError):
        MultipatchProblem([box2, box3], [])


def test_single_patch_has_an_empty_skeleton():
    patch = quadratic_problem().patches[0]
    patch = Patch(patch.geometry, {s: "d" for s in ("u0", "u1", "v0", "v1")}, patch.spec)
    system = initialize(MultipatchProblem([patch], []))
    assert system.n_gamma == 0
    sol = solve(system)
    x = np.random.default_rng(1).random((10, 2))
    np.testing.assert_allclose(sol.evaluate(x), quadratic(x), atol=1e-10)

