import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from internodes.assembly import (Patch, ProblemSpec, assemble_load, assemble_mass,
                                 assemble_stiffness, compute_residuals, correction_matrix,
                                 dirichlet_coefficients, gauss_legendre, interface_mass_matrix,
                                 interpolate_on_side, side_flux_matrix, volume_quadrature)
from internodes.geometry import make_box, make_extruded, make_quarter_annulus, refine

ANNULUS_AREA = 3 * np.pi / 4  # quarter annulus 1 < r < 2
# Gauss rules are not exact for rational integrands: the annulus checks allow
# the quadrature error, the affine (parallelogram) checks are exact.
QUAD_RTOL = 1e-7


def parallelogram_patch(p=2, n_el=(3, 2), spec=None):
    box = make_box([0, 0], [2, 1])
    P = box.control_points @ np.array([[1.0, 0.0], [0.5, 1.0]])  # shear: area stays 2
    geo = refine(type(box).from_arrays(box.kvs, box.weights, P), degrees=(p, p), n_el=n_el)
    tags = {"u0": "dirichlet", "u1": "interface", "v0": "dirichlet", "v1": "neumann"}
    return Patch(geo, tags, spec or ProblemSpec())


def annulus_patch(p=2, n_el=(3, 4), spec=None, tags=None):
    geo = refine(make_quarter_annulus(1.0, 2.0), degrees=(p, p), n_el=n_el)
    tags = tags or {"u0": "dirichlet", "u1": "interface", "v0": "dirichlet", "v1": "neumann"}
    return Patch(geo, tags, spec or ProblemSpec())


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(3)
    assert np.sum(w * x ** 4) == pytest.approx(2 / 5)
    with pytest.raises(ValueError):
        gauss_legendre(0)


def test_quadrature_weights_sum_to_area():
    q = volume_quadrature(annulus_patch().geometry)
    assert q.w.sum() == pytest.approx(ANNULUS_AREA, rel=QUAD_RTOL)
    assert volume_quadrature(parallelogram_patch().geometry).w.sum() == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("nu", [1.0, 3.5, lambda x: 1.0 + x[:, 0] ** 2])
def test_stiffness_kills_constants(nu):
    A = assemble_stiffness(annulus_patch(spec=ProblemSpec(nu=nu)))
    np.testing.assert_allclose(A @ np.ones(A.shape[0]), 0.0, atol=1e-12)
    assert abs(A - A.T).max() < 1e-13


@pytest.mark.parametrize("make, area, rtol", [(annulus_patch, ANNULUS_AREA, QUAD_RTOL),
                                               (parallelogram_patch, 2.0, 1e-13)])
def test_stiffness_energy_of_a_coordinate(make, area, rtol):
    # u = x lies in the isoparametric space; its energy is the area
    patch = make()
    A = assemble_stiffness(patch)
    u = patch.geometry.control_points[:, 0]
    assert u @ A @ u == pytest.approx(area, rel=rtol)


@pytest.mark.parametrize("make, atol", [(annulus_patch, 1e-6), (parallelogram_patch, 1e-12)])
def test_green_identity_links_stiffness_and_side_fluxes(make, atol):
    # for harmonic u in the space: A u = sum over sides of int du/dn phi = -sum B u
    patch = make(p=3)
    A = assemble_stiffness(patch)
    u = patch.geometry.control_points @ np.array([0.3, -1.2])
    total = A @ u + sum(side_flux_matrix(patch, s) @ u for s in patch.sides)
    np.testing.assert_allclose(total, 0.0, atol=atol)


def test_reaction_term_adds_mass():
    spec = ProblemSpec(alpha=2.0)
    patch = annulus_patch(spec=spec)
    A = assemble_stiffness(patch)
    A0 = assemble_stiffness(annulus_patch())
    M = assemble_mass(patch)
    assert abs(A - A0 - 2.0 * M).max() < 1e-13


def test_mass_sums_to_area_and_is_spd():
    M = assemble_mass(annulus_patch())
    assert M.sum() == pytest.approx(ANNULUS_AREA, rel=QUAD_RTOL)
    np.linalg.cholesky(M.toarray())


def test_mass_of_a_3d_patch():
    geo = refine(make_extruded(make_quarter_annulus(1.0, 2.0), 0.0, 2.0), degrees=(2, 2, 2),
                 n_el=(2, 2, 2))
    tags = {s: "dirichlet" for s in ("u0", "u1", "v0", "v1", "w0", "w1")}
    M = assemble_mass(Patch(geo, tags))
    assert M.sum() == pytest.approx(2 * ANNULUS_AREA, rel=1e-6)


@pytest.mark.parametrize("make, side, length, rtol", [
    (annulus_patch, "u1", np.pi, QUAD_RTOL), (annulus_patch, "u0", np.pi / 2, QUAD_RTOL),
    (annulus_patch, "v0", 1.0, 1e-13), (parallelogram_patch, "u1", np.hypot(0.5, 1.0), 1e-13),
])
def test_interface_mass_is_spd_and_sums_to_length(make, side, length, rtol):
    M = interface_mass_matrix(make(), side)
    assert M.sum() == pytest.approx(length, rel=rtol)
    np.testing.assert_allclose(M, M.T, atol=1e-15)
    assert np.linalg.eigvalsh(M).min() > 0


def test_load_and_neumann_terms():
    spec = ProblemSpec(f=2.0, neumann=0.5)
    b = assemble_load(parallelogram_patch(spec=spec))
    # int f + int_{v1} h, with v1 the top edge of length 2
    assert b.sum() == pytest.approx(2.0 * 2.0 + 0.5 * 2.0, rel=1e-13)


def test_negative_diffusion_rejected():
    with pytest.raises(ValueError):
        assemble_stiffness(annulus_patch(spec=ProblemSpec(nu=-1.0)))


def test_patch_validation():
    geo = make_box([0, 0], [1, 1])
    with pytest.raises(ValueError, match="untagged"):
        Patch(geo, {"u0": "d", "u1": "d", "v0": "d"})
    with pytest.raises(ValueError, match="unknown boundary tag"):
        Patch(geo, {"u0": "d", "u1": "d", "v0": "d", "v1": "robin"})
    with pytest.raises(ValueError):
        Patch(geo, {"u0": "d", "u1": "d", "v0": "d", "v1": "d", "w0": "d"})


def test_partition_is_consistent():
    patch = annulus_patch(p=3)
    part = patch.partition
    n = patch.n_dofs
    face_dofs = patch.side_dofs("u1")
    np.testing.assert_array_equal(np.sort(part.closure["u1"]), np.sort(face_dofs))
    assert set(part.inner["u1"]).isdisjoint(part.boundary["u1"])
    assert len(part.boundary["u1"]) == 2
    used = set(part.free) | set(part.dirichlet) | set(face_dofs)
    assert used == set(range(n))
    assert set(part.free).isdisjoint(part.dirichlet)
    assert set(part.free).isdisjoint(face_dofs)


def test_correction_rows_live_on_the_face_boundary():
    patch = annulus_patch()
    C = correction_matrix(patch, "u1")
    rows = np.unique(sp.coo_matrix(C).row)
    assert set(rows) <= set(patch.partition.boundary["u1"])
    # Neumann sides do not contribute: the v1 end row only sees u0 and v0 fluxes
    expected = sp.diags(np.isin(np.arange(patch.n_dofs), patch.partition.boundary["u1"]).astype(float))
    ref = expected @ (side_flux_matrix(patch, "u0") + side_flux_matrix(patch, "v0"))
    assert abs(C - ref).max() < 1e-14


def test_residuals_vanish_for_the_discrete_solution_on_closure_rows():
    patch = annulus_patch()
    A = assemble_stiffness(patch)
    u = np.random.default_rng(3).normal(size=patch.n_dofs)
    f = A @ u
    closure = {"u1": patch.partition.closure["u1"]}
    r = compute_residuals({"u1": A}, u, f, closure)
    np.testing.assert_allclose(r["u1"], 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        compute_residuals({"u1": A[:, :3]}, u, f, closure)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_greville_interpolation_reproduces_affine_data(a, b, c):
    patch = annulus_patch()
    fn = lambda x: a + b * x[:, 0] + c * x[:, 1]  # noqa: E731
    dofs, coef = interpolate_on_side(patch, "u1", fn)
    expected = fn(patch.geometry.control_points[dofs])
    np.testing.assert_allclose(coef, expected, atol=1e-12)


def test_dirichlet_coefficients_only_on_dirichlet_sides():
    spec = ProblemSpec(g=lambda x: x[:, 0] + 2 * x[:, 1])
    patch = annulus_patch(spec=spec)
    g = dirichlet_coefficients(patch)
    d = patch.partition.dirichlet
    P = patch.geometry.control_points
    np.testing.assert_allclose(g[d], P[d, 0] + 2 * P[d, 1], atol=1e-12)
    others = np.setdiff1d(np.arange(patch.n_dofs), d)
    assert np.all(g[others] == 0)
