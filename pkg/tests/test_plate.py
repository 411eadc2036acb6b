"""C¹ plate element and plate-pressure element: patch and consistency tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _meshes import prism_with_sigma
from biotvem.basis import n_monomials
from biotvem.exceptions import ElementError
from biotvem.mesh import example1_rule, extract_surface, generate_cube_mesh, tag_boundaries
from biotvem.params import ModelParams
from biotvem.plate import (
    build_plate_element,
    build_plate_pressure_element,
    hessian_edge_terms,
    local_b2_b3,
    local_c1,
    local_c2,
    local_rhs_G_M,
)

HEXAGON = np.array([[0.0, 0.0], [1.0, -0.2], [1.6, 0.5], [1.2, 1.3], [0.3, 1.4], [-0.3, 0.7]])
PARAMS = ModelParams(rho_p=1.7, D=0.6, alpha=0.4, c0=0.3, kappa=1.9, tau=0.8)


def _surfaces():
    cube = tag_boundaries(generate_cube_mesh(2), example1_rule())
    return {
        "square": extract_surface(cube)[0],
        "pentagon": extract_surface(prism_with_sigma())[0],
        "hexagon": extract_surface(prism_with_sigma(HEXAGON))[0],
    }


SURFACES = _surfaces()


@pytest.fixture(scope="module", params=sorted(SURFACES))
def pair(request):
    s = SURFACES[request.param]
    return build_plate_element(s, 0), build_plate_pressure_element(s, 0)


def _p2(el, c):
    def w(x):
        return el.basis.values(x) @ c

    def grad(x):
        return np.einsum("qbj,b->qj", el.basis.gradients(x), c)

    return w, grad


def test_plate_projector_reproduces_p2(pair):
    el, _ = pair
    np.testing.assert_allclose(el.pi @ el.dof_matrix, np.eye(6), atol=1e-11)
    c = np.random.default_rng(0).normal(size=6)
    np.testing.assert_allclose(el.dofs_of(*_p2(el, c)), el.dof_matrix @ c, atol=1e-12)


def test_plate_gradient_projection_exact(pair):
    el, _ = pair
    c = np.random.default_rng(1).normal(size=6)
    g = el.grad_proj @ (el.dof_matrix @ c)
    pts = el.quad.points[:6]
    n1 = n_monomials(2, 1)
    V = el.basis.values(pts)[:, :n1]
    exact = np.einsum("qbj,b->qj", el.basis.gradients(pts), c)
    for j in range(2):
        np.testing.assert_allclose(V @ g[j * n1:(j + 1) * n1], exact[:, j], atol=1e-11)


def test_hermite_trace_exact_for_cubic_traces(pair):
    el, _ = pair
    c = np.random.default_rng(2).normal(size=6)
    w, _ = _p2(el, c)
    d = el.dof_matrix @ c
    s = np.linspace(0, 1, 5)
    N = len(el.coords)
    for j in range(N):
        a, b = el.coords[j], el.coords[(j + 1) % N]
        x = a + s[:, None] * (b - a)
        np.testing.assert_allclose(el.edge_trace(d, j, s), w(x), atol=1e-12)


def test_edge_terms_dual_route(pair):
    """Closed-form tangential integration agrees with Gauss quadrature of the traces."""
    el, _ = pair
    rng = np.random.default_rng(3)
    for _ in range(3):
        H = rng.normal(size=(2, 2))
        H = H + H.T
        a = hessian_edge_terms(el.coords, el.vertex_h, H)
        b = hessian_edge_terms(el.coords, el.vertex_h, H, quadrature=True)
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_c2_consistency_and_stability(pair):
    el, _ = pair
    C = local_c2(el, PARAMS)
    rng = np.random.default_rng(4)
    q = el.quad
    for _ in range(3):
        c1, c2 = rng.normal(size=6), rng.normal(size=6)
        V = el.basis.values(q.points)
        H = el.basis.hessians(q.points)
        exact = q.integrate(
            PARAMS.rho_p / PARAMS.tau**3 * (V @ c1) * (V @ c2)
            + PARAMS.D / PARAMS.tau * np.einsum("qij,qij->q", np.einsum("qbij,b->qij", H, c1), np.einsum("qbij,b->qij", H, c2))
        )
        assert (el.dof_matrix @ c1) @ C @ (el.dof_matrix @ c2) == pytest.approx(exact, rel=1e-10)
    assert np.linalg.eigvalsh(C).min() > 0
    # without inertia the kernel is exactly the affine functions
    C0 = local_c2(el, PARAMS.replace(rho_p=1e-300))
    ev = np.linalg.eigvalsh(C0)
    assert np.sum(ev < 1e-10 * ev.max()) == 3


def test_pressure_projector_and_c1(pair):
    _, pp = pair
    np.testing.assert_allclose(pp.pi @ pp.dof_matrix, np.eye(3), atol=1e-12)
    C = local_c1(pp, PARAMS)
    rng = np.random.default_rng(5)
    q = pp.quad
    for _ in range(3):
        a, b = rng.normal(size=3), rng.normal(size=3)
        V = pp.basis.values(q.points)
        G = pp.basis.gradients(q.points)
        exact = q.integrate(
            PARAMS.c0 / PARAMS.tau * (V @ a) * (V @ b)
            + PARAMS.kappa * np.einsum("qj,qj->q", np.einsum("qbj,b->qj", G, a), np.einsum("qbj,b->qj", G, b))
        )
        assert (pp.dof_matrix @ a) @ C @ (pp.dof_matrix @ b) == pytest.approx(exact, rel=1e-11)
    ev = np.linalg.eigvalsh(C)
    assert ev.min() > 0
    # c0 = 0 leaves only the constants in the kernel
    ev0 = np.linalg.eigvalsh(local_c1(pp, PARAMS.replace(c0=0.0)))
    assert np.sum(ev0 < 1e-12 * ev0.max()) == 1


def test_b2_b3_consistency(pair):
    el, pp = pair
    b2, b3 = local_b2_b3(pp, el, PARAMS)
    assert b2.shape == (pp.n_dofs, el.n_dofs) == b3.shape
    rng = np.random.default_rng(6)
    q = el.quad
    for _ in range(3):
        a, c = rng.normal(size=3), rng.normal(size=6)
        psi = pp.basis.values(q.points) @ a
        gpsi = np.einsum("qbj,b->qj", pp.basis.gradients(q.points), a)
        zeta = el.basis.values(q.points) @ c
        gzeta = np.einsum("qbj,b->qj", el.basis.gradients(q.points), c)
        ex2 = -PARAMS.alpha / PARAMS.tau * q.integrate(np.sum(gpsi * gzeta, 1))
        ex3 = -1.0 / PARAMS.tau * q.integrate(psi * zeta)
        dp, dw = pp.dof_matrix @ a, el.dof_matrix @ c
        assert dp @ b2 @ dw == pytest.approx(ex2, rel=1e-11, abs=1e-13)
        assert dp @ b3 @ dw == pytest.approx(ex3, rel=1e-11, abs=1e-13)


def test_rhs_consistency(pair):
    el, pp = pair

    def g(x):
        return np.sin(x[:, 0]) + x[:, 1] ** 2

    def m(x):
        return np.cos(x[:, 0] * x[:, 1])

    G, M = local_rhs_G_M(pp, el, g, m, PARAMS)
    rng = np.random.default_rng(7)
    a, c = rng.normal(size=3), rng.normal(size=6)
    qp, qw = pp.quad, el.quad
    assert G @ (pp.dof_matrix @ a) == pytest.approx(-qp.integrate(g(qp.points) * (pp.basis.values(qp.points) @ a)), rel=1e-11)
    exact_m = qw.integrate(m(qw.points) * (el.basis.values(qw.points) @ c)) / PARAMS.tau
    assert M @ (el.dof_matrix @ c) == pytest.approx(exact_m, rel=1e-11)


def test_unit_square_b3_area():
    s = SURFACES["square"]
    el, pp = build_plate_element(s, 0), build_plate_pressure_element(s, 0)
    _, b3 = local_b2_b3(pp, el, ModelParams())
    ones_w = el.dof_matrix[:, 0]
    assert np.ones(pp.n_dofs) @ b3 @ ones_w == pytest.approx(-0.25, rel=1e-14)


def test_unsupported_degrees():
    s = SURFACES["square"]
    with pytest.raises(ElementError):
        build_plate_element(s, 0, k=3)
    with pytest.raises(ElementError):
        build_plate_pressure_element(s, 0, ell=2)


@st.composite
def polygons(draw):
    n = draw(st.integers(3, 8))
    gaps = draw(st.lists(st.floats(0.3, 1.0), min_size=n, max_size=n))
    ang = np.cumsum(gaps) / np.sum(gaps) * 2 * np.pi
    rad = draw(st.lists(st.floats(0.7, 1.3), min_size=n, max_size=n))
    scale = draw(st.sampled_from([0.05, 1.0, 20.0]))
    return scale * np.column_stack([np.cos(ang), np.sin(ang)]) * np.array(rad)[:, None]


@settings(max_examples=15, deadline=None)
@given(polygons())
def test_patch_random_polygons(xy):
    s, _ = extract_surface(prism_with_sigma(xy))
    el, pp = build_plate_element(s, 0), build_plate_pressure_element(s, 0)
    np.testing.assert_allclose(el.pi @ el.dof_matrix, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(pp.pi @ pp.dof_matrix, np.eye(3), atol=1e-10)
    for D, P in ((el.dof_matrix, el.pi), (pp.dof_matrix, pp.pi)):
        R = np.eye(len(D)) - D @ P
        assert np.abs(R @ D).max() < 1e-10
