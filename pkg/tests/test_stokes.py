"""Divergence-free k = 2 Stokes virtual element: patch and consistency tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _meshes import PENTAGON, octa_mesh, prism_mesh, tetra_mesh
from biotvem.basis import n_monomials
from biotvem.exceptions import ElementError
from biotvem.mesh import generate_cube_mesh
from biotvem.params import ModelParams
from biotvem.stokes import (
    build_cell_element,
    build_face_projectors,
    eval_vector_poly,
    eval_vector_poly_grad,
    local_b1_div,
    local_rhs_F,
    local_stokes_a,
    stabilization_matrices,
)

N2 = n_monomials(3, 2)


def _cell(mesh, k=0):
    fe = {f: build_face_projectors(mesh, f) for f in mesh.cells[k]}
    return build_cell_element(mesh, k, fe)


MESHES = {
    "cube": lambda: generate_cube_mesh(1),
    "prism": lambda: prism_mesh(PENTAGON, 0.0, 0.8),
    "tetra": tetra_mesh,
    "octa": octa_mesh,
}


@pytest.fixture(scope="module", params=sorted(MESHES))
def elem(request):
    return _cell(MESHES[request.param]())


def test_dof_counts():
    el = _cell(generate_cube_mesh(1))
    # 3 x (8 vertices + 12 edges + 6 faces) + 3 divergence moments
    assert el.n_dofs == 81
    assert el.n_div == 3
    assert np.linalg.matrix_rank(el.dof_matrix) == 3 * N2


def test_projectors_reproduce_p2(elem):
    I = np.eye(3 * N2)
    np.testing.assert_allclose(elem.pi_nabla @ elem.dof_matrix, I, atol=1e-11)
    np.testing.assert_allclose(elem.pi0 @ elem.dof_matrix, I, atol=1e-11)


def test_stabilizers_vanish_on_polynomials(elem):
    S0, Sn = stabilization_matrices(elem, 1.0, 1.0)
    D = elem.dof_matrix
    assert np.abs(S0 @ D).max() < 1e-11
    assert np.abs(Sn @ D).max() < 1e-11
    # both are positive semi-definite with kernel exactly the polynomial DOFs
    for S in (S0, Sn):
        ev = np.linalg.eigvalsh(S)
        assert ev.min() > -1e-13 * ev.max()
        assert np.sum(ev > 1e-10 * ev.max()) == elem.n_dofs - 3 * N2


def _random_poly(rng):
    return rng.normal(size=3 * N2)


def test_divergence_representation_exact(elem):
    rng = np.random.default_rng(11)
    q = _random_poly(rng)
    dofs = elem.dof_matrix @ q
    pts = elem.quad.points[:5]
    J = eval_vector_poly_grad(elem, q, pts)
    div_exact = np.trace(J, axis1=1, axis2=2)
    n1 = n_monomials(3, 1)
    div_h = elem.basis.values(pts)[:, :n1] @ (elem.div_rep @ dofs)
    np.testing.assert_allclose(div_h, div_exact, atol=1e-11)


def test_gradient_projection_exact(elem):
    rng = np.random.default_rng(12)
    q = _random_poly(rng)
    g = elem.grad_proj @ (elem.dof_matrix @ q)
    pts = elem.quad.points[:5]
    J = eval_vector_poly_grad(elem, q, pts)
    n1 = n_monomials(3, 1)
    V = elem.basis.values(pts)[:, :n1]
    for c in range(3):
        for j in range(3):
            row = (c * 3 + j) * n1
            np.testing.assert_allclose(V @ g[row:row + n1], J[:, c, j], atol=1e-11)


def test_consistency_a_and_b1(elem):
    """Discrete forms equal the exact integrals on random polynomial pairs."""
    P = ModelParams(rho_f=2.0, mu=0.7, tau=0.5)
    rng = np.random.default_rng(13)
    A = local_stokes_a(elem, P)
    B = local_b1_div(elem)
    q = elem.quad
    n1 = n_monomials(3, 1)
    for _ in range(3):
        p1, p2 = _random_poly(rng), _random_poly(rng)
        v1, v2 = eval_vector_poly(elem, p1, q.points), eval_vector_poly(elem, p2, q.points)
        J1, J2 = eval_vector_poly_grad(elem, p1, q.points), eval_vector_poly_grad(elem, p2, q.points)
        exact = q.integrate(P.rho_f / P.tau * np.sum(v1 * v2, 1) + P.mu * np.sum(J1 * J2, (1, 2)))
        d1, d2 = elem.dof_matrix @ p1, elem.dof_matrix @ p2
        assert d1 @ A @ d2 == pytest.approx(exact, rel=1e-10, abs=1e-12)
        r = rng.normal(size=n1)
        pres = elem.basis.values(q.points)[:, :n1] @ r
        exact_b = -q.integrate(pres * np.trace(J2, axis1=1, axis2=2))
        assert r @ B @ d2 == pytest.approx(exact_b, rel=1e-10, abs=1e-12)


def test_tensor_gauss_oracle_on_cube():
    """Independent route: tensor Gauss-Legendre on the unit cube cell."""
    el = _cell(generate_cube_mesh(1))
    x, w = np.polynomial.legendre.leggauss(5)
    x, w = 0.5 * (x + 1), 0.5 * w
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", w, w, w).ravel()
    rng = np.random.default_rng(14)
    p1, p2 = _random_poly(rng), _random_poly(rng)
    v1, v2 = eval_vector_poly(el, p1, X), eval_vector_poly(el, p2, X)
    J1, J2 = eval_vector_poly_grad(el, p1, X), eval_vector_poly_grad(el, p2, X)
    exact = W @ (np.sum(v1 * v2, 1) + np.sum(J1 * J2, (1, 2)))
    d1, d2 = el.dof_matrix @ p1, el.dof_matrix @ p2
    assert d1 @ local_stokes_a(el, ModelParams()) @ d2 == pytest.approx(exact, rel=1e-12)


def test_load_vector_consistency(elem):
    """F(v) = ∫ f · v for polynomial v and a non-polynomial f."""
    def f(x):
        return np.column_stack([np.sin(x[:, 0]), np.cos(x[:, 1] * x[:, 2]), np.exp(x[:, 0] - x[:, 2])])

    rng = np.random.default_rng(15)
    p = _random_poly(rng)
    F = local_rhs_F(elem, f)
    q = elem.quad
    exact = q.integrate(np.sum(f(q.points) * eval_vector_poly(elem, p, q.points), 1))
    assert F @ (elem.dof_matrix @ p) == pytest.approx(exact, rel=1e-11)


def test_interpolant_of_polynomial_matches_dof_matrix(elem):
    rng = np.random.default_rng(16)
    p = _random_poly(rng)

    def u(x):
        return eval_vector_poly(elem, p, x)

    def divu(x):
        return np.trace(eval_vector_poly_grad(elem, p, x), axis1=1, axis2=2)

    np.testing.assert_allclose(elem.dofs_of(u, divu), elem.dof_matrix @ p, atol=1e-12)


def test_a_is_spd(elem):
    A = local_stokes_a(elem, ModelParams())
    np.testing.assert_allclose(A, A.T, atol=1e-13)
    assert np.linalg.eigvalsh(A).min() > 0


def test_face_projectors():
    m = prism_mesh(PENTAGON)
    rng = np.random.default_rng(17)
    for f in range(m.n_faces):
        fe = build_face_projectors(m, f)
        c2 = rng.normal(size=6)

        def fun(x):
            return fe.basis.values(fe.to_local(x))[:, :6] @ c2

        dofs = fe.dofs_of(fun)
        np.testing.assert_allclose(fe.pi_nabla @ dofs, c2, atol=1e-11)
        np.testing.assert_allclose(fe.pi0_2 @ dofs, c2, atol=1e-11)
        c3 = np.zeros(10)
        c3[:6] = c2
        np.testing.assert_allclose(fe.pi0_3 @ dofs, c3, atol=1e-11)


def test_only_k2_supported():
    with pytest.raises(ElementError):
        build_face_projectors(generate_cube_mesh(1), 0, k=3)


@st.composite
def prisms(draw):
    n = draw(st.integers(3, 7))
    gaps = draw(st.lists(st.floats(0.3, 1.0), min_size=n, max_size=n))
    ang = np.cumsum(gaps) / np.sum(gaps) * 2 * np.pi
    rad = draw(st.lists(st.floats(0.7, 1.3), min_size=n, max_size=n))
    base = np.column_stack([np.cos(ang), np.sin(ang)]) * np.array(rad)[:, None]
    height = draw(st.floats(0.3, 2.0))
    scale = draw(st.sampled_from([1e-2, 1.0, 10.0]))
    return prism_mesh(scale * base, 0.0, scale * height)


@settings(max_examples=12, deadline=None)
@given(prisms())
def test_patch_random_prisms(mesh):
    el = _cell(mesh)
    I = np.eye(3 * N2)
    np.testing.assert_allclose(el.pi_nabla @ el.dof_matrix, I, atol=1e-10)
    np.testing.assert_allclose(el.pi0 @ el.dof_matrix, I, atol=1e-10)
    S0, Sn = stabilization_matrices(el)
    scale = max(np.abs(S0).max(), np.abs(Sn).max(), 1.0)
    assert np.abs(S0 @ el.dof_matrix).max() < 1e-10 * scale
    assert np.abs(Sn @ el.dof_matrix).max() < 1e-10 * scale
