import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from internodes.cases import (EXACT_SOLUTIONS, KelloggExact, _kellogg_mu, builtin_cases,
                              exact_solution, kellogg_exact, kellogg_parameters)
from internodes.coupling import build_adjacency, measure_gap
from internodes.schur import initialize

CASES = builtin_cases()


def kellogg_closed_form(gamma):
    """Independent oracle: the branch with rho = pi/4 solves the system in closed form."""
    sigma = np.pi / 4 - np.pi / (2 * gamma)
    R = -np.tan(sigma * gamma) / np.tan(np.pi * gamma / 4)
    return R, sigma


class TestKellogg:
    @pytest.mark.parametrize("gamma, R_published, rtol", [(0.1, 161.45, 5e-3), (0.4, 9.47, 5e-3),
                                                      (0.6, 3.85, 5e-3), (1.8, 2.5e-2, 2e-2)])
    def test_R_matches_published_values(self, gamma, R_published, rtol):
        R, rho, sigma = kellogg_parameters(gamma)
        assert R == pytest.approx(R_published, rel=rtol)

    @pytest.mark.parametrize("gamma, R_frozen", [(0.1, 161.4476), (0.4, 9.4721),
                                                 (0.6, 3.8518), (1.8, 0.025086)])
    def test_R_frozen_values(self, gamma, R_frozen):
        assert kellogg_parameters(gamma)[0] == pytest.approx(R_frozen, rel=1e-4)

    @pytest.mark.parametrize("gamma", [0.1, 0.25, 0.4, 0.6, 0.9, 1.2, 1.8])
    def test_against_closed_form(self, gamma):
        R, rho, sigma = kellogg_parameters(gamma)
        R_ref, sigma_ref = kellogg_closed_form(gamma)
        assert rho == pytest.approx(np.pi / 4, abs=1e-10)
        assert R == pytest.approx(R_ref, rel=1e-10)
        assert sigma == pytest.approx(sigma_ref, abs=1e-10)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0, -0.5])
    def test_rejects_invalid_gamma(self, gamma):
        with pytest.raises(ValueError):
            kellogg_parameters(gamma)

    @pytest.mark.parametrize("gamma", [0.1, 0.6, 1.8])
    def test_mu_is_continuous_and_periodic(self, gamma):
        _, rho, sigma = kellogg_parameters(gamma)
        eps = 1e-12
        for t in (np.pi / 2, np.pi, 3 * np.pi / 2):
            lo, hi = _kellogg_mu(np.array([t - eps, t + eps]), gamma, rho, sigma)
            assert lo == pytest.approx(hi, abs=1e-10)
        a, b = _kellogg_mu(np.array([0.0, 2 * np.pi - 1e-13]), gamma, rho, sigma)
        assert a == pytest.approx(b, abs=1e-10)

    @pytest.mark.parametrize("gamma", [0.1, 0.6, 1.8])
    def test_weighted_flux_is_continuous(self, gamma):
        # R d(mu)/d(theta) from the first quadrant equals d(mu)/d(theta) from the second
        R, rho, sigma = kellogg_parameters(gamma)
        h = 1e-6
        t = np.pi / 2
        mu = lambda th: _kellogg_mu(np.array([th]), gamma, rho, sigma)[0]  # noqa: E731
        left = (mu(t - h) - mu(t - 2 * h)) / h * 1.5 - (mu(t - 2 * h) - mu(t - 3 * h)) / h * 0.5
        right = (mu(t + 2 * h) - mu(t + h)) / h * -0.5 + (mu(t + h) - mu(t)) / h * 1.5
        assert R * left == pytest.approx(right, rel=1e-5, abs=1e-8)

    def test_gradient_against_finite_differences(self):
        ex = KelloggExact(0.6)
        x = np.array([[0.3, 0.4], [-0.5, 0.2], [-0.1, -0.7], [0.6, -0.3]])
        h = 1e-7
        fd = np.stack([(ex.u(x + h * e) - ex.u(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        np.testing.assert_allclose(ex.grad(x), fd, rtol=1e-6, atol=1e-8)

    def test_exact_returns_radial_power(self):
        _, rho, sigma = kellogg_parameters(0.6)
        u1, _, _ = kellogg_exact(np.array([0.5]), np.array([0.3]), 0.6, rho, sigma)
        u2, _, _ = kellogg_exact(np.array([1.0]), np.array([0.3]), 0.6, rho, sigma)
        assert u1[0] / u2[0] == pytest.approx(0.5 ** 0.6)

    def test_quadrant_coefficients(self):
        ex = KelloggExact(0.6)
        assert [ex.nu(q) for q in range(4)] == [ex.R, 1.0, ex.R, 1.0]


@pytest.mark.parametrize("name", [n for n in EXACT_SOLUTIONS if n != "kellogg"])
def test_manufactured_sources_match_finite_differences(name):
    ex = exact_solution(name)
    rng = np.random.default_rng(7)
    x = rng.uniform(0.3, 0.9, size=(6, ex.dim))
    h = 1e-4
    lap = sum((ex.u(x + h * e) - 2 * ex.u(x) + ex.u(x - h * e)) / h ** 2 for e in np.eye(ex.dim))
    np.testing.assert_allclose(ex.laplacian(x), lap, rtol=1e-5, atol=1e-5)
    grad = np.stack([(ex.u(x + h * e) - ex.u(x - h * e)) / (2 * h) for e in np.eye(ex.dim)], -1)
    np.testing.assert_allclose(ex.grad(x), grad, rtol=1e-6, atol=1e-7)
    f = ex.source(2.0, 3.0)(x)
    np.testing.assert_allclose(f, -2.0 * ex.laplacian(x) + 3.0 * ex.u(x))


def test_t1_exact_solution():
    ex = exact_solution("t1_sine")
    x = np.array([[0.2, 0.7]])
    assert ex.u(x)[0] == pytest.approx(np.sin(1.5 * np.pi * 0.2) * np.sin(3 * np.pi * 0.7))


def test_unknown_exact_solution():
    with pytest.raises(KeyError):
        exact_solution("nope")


def test_registry_names():
    assert set(CASES) == {"t1_balanced", "t1_master_refined", "t1_slave_refined",
                          "t2_nonwatertight", "t3_ring7", "t4_kellogg", "t5_nine_nonwatertight",
                          "t6_3d_smoke", "t7_reentrant_smoke"}


@pytest.mark.parametrize("side, index", [("u1", 0), ("u0", 1)])
def test_t2_interface_curve(side, index):
    # in variable mode the curves interpolate x = 1 + 0.2 sin(2 pi y) at the face Greville nodes
    built = CASES["t2_nonwatertight"](8, 3, mode="variable")
    face = built.problem.patches[index].face(side)
    x, y = face.greville_phys.T
    np.testing.assert_allclose(x, 1 + 0.2 * np.sin(2 * np.pi * y), atol=1e-12)


def test_t2_fixed_gap():
    built = CASES["t2_nonwatertight"](4)
    faces = {k: built.problem.patches[k[0]].face(k[1], k[0]) for k in built.gap_pairs[0]}
    assert measure_gap(*faces.values()) == pytest.approx(0.0197, rel=0.02)


@pytest.mark.parametrize("nbar", [4, 6])
def test_t3_layout(nbar):
    built = CASES["t3_ring7"](nbar)
    patches = built.problem.patches
    assert len(patches) == 7 and len(built.problem.pairs) == 11
    assert patches[5].geometry.n_el == (nbar, 3 * nbar)  # omega6: nbar x 3 nbar
    adj = build_adjacency(patches, built.problem.pairs)
    for pair in built.problem.pairs:
        assert pair.slave in adj.neighbours[pair.master]
        assert pair.master in adj.neighbours[pair.slave]


@pytest.mark.parametrize("nbar, dofs", [(10, 1300), (15, 2690), (20, 4580)])
def test_t4_dof_counts(nbar, dofs):
    built = CASES["t4_kellogg"](nbar)
    assert sum(p.n_dofs for p in built.problem.patches) == dofs


def test_t4_masters_and_coefficients():
    built = CASES["t4_kellogg"](5, gamma=0.4)
    masters = {pr.master[0] for pr in built.problem.pairs}
    assert masters == {1, 3}  # omega2 and omega4
    R = kellogg_parameters(0.4)[0]
    assert [c["nu"] for c in built.coefficients] == pytest.approx([R, 1.0, R, 1.0])


def test_t5_coefficients_and_gap():
    built = CASES["t5_nine_nonwatertight"]()
    assert [c["nu"] for c in built.coefficients] == [10, 0.005, 1, 0.01, 100, 0.005, 1, 0.005, 0.1]
    assert built.exact is None and built.source == 1.0
    assert all(not pr.watertight for pr in built.problem.pairs)


@pytest.mark.parametrize("name", sorted(CASES))
def test_every_case_initializes(name):
    built = CASES[name]()
    system = initialize(built.problem)
    assert system.n_gamma > 0
    dims = {p.dim for p in built.problem.patches}
    assert dims == {CASES[name].dim}


@given(st.floats(0.05, 1.95).filter(lambda g: abs(g - 1) > 0.05))
def test_kellogg_residual_is_small(gamma):
    R, rho, sigma = kellogg_parameters(gamma)
    g = gamma
    eqs = [
        R + np.tan((np.pi / 2 - sigma) * g) / np.tan(rho * g),
        1 / R + np.tan(rho * g) / np.tan(sigma * g),
        R + np.tan(sigma * g) / np.tan((np.pi / 2 - rho) * g),
    ]
    np.testing.assert_allclose(eqs, 0.0, atol=1e-9 * max(1.0, R))
