"""Global DOF layout, interface forms, block assembly and the polynomial patch test."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from biotvem.coupling import (
    LoadData,
    assemble,
    assemble_blocks,
    discretize,
    inf_sup_constant,
    interpolate_phi,
    interpolate_u,
    interpolate_w,
    local_a_sigma,
    local_a_sigma_cross,
    local_b1_sigma,
)
from biotvem.exceptions import ConfigurationError
from biotvem.harness import build_case, compute_errors
from biotvem.mesh import SIGMA, example1_rule, generate_cube_mesh, tag_boundaries
from biotvem.params import ModelParams
from biotvem.solver import SolverConfig, solve

PARAMS = ModelParams(rho_f=1.3, mu=0.8, gamma=0.6, rho_p=1.1, D=0.9, alpha=0.7, c0=0.4, kappa=1.2, tau=0.9)


@pytest.fixture(scope="module")
def disc2():
    return discretize(tag_boundaries(generate_cube_mesh(2), example1_rule()))


def test_layout_sizes(disc2):
    lay = disc2.layout
    assert (lay.n_u, lay.n_p, lay.n_phi, lay.n_w) == (375, 32, 9, 27)
    assert lay.size == 443
    assert len(lay.constrained) == 203
    free = lay.free
    # one interior Σ vertex carries the free φ and w DOFs
    assert np.sum((free >= lay.offsets["phi"]) & (free < lay.offsets["w"])) == 1
    assert np.sum(free >= lay.offsets["w"]) == 3


def test_sigma_dirichlet_rejected():
    mesh = tag_boundaries(generate_cube_mesh(1), example1_rule())
    with pytest.raises(ConfigurationError):
        discretize(mesh, dirichlet_tags=(SIGMA,))


def test_a_sigma_dual_route(disc2):
    n = disc2.n_sigma
    for f in disc2.connector.polygon_to_face:
        fe = disc2.face_elems[int(f)]
        np.testing.assert_allclose(local_a_sigma(fe, 0.7, n), local_a_sigma_cross(fe, 0.7, n), atol=1e-14)


def test_a_sigma_ignores_normal_component(disc2):
    n = disc2.n_sigma
    fe = disc2.face_elems[int(disc2.connector.polygon_to_face[0])]
    A = local_a_sigma(fe, 1.0, n)
    v = np.kron(np.random.default_rng(0).normal(size=fe.n_dofs), n)
    np.testing.assert_allclose(A @ v, 0.0, atol=1e-14)


def test_sigma_pairing_consistency(disc2):
    """∫_F ψ v·n for P_1 ψ and quadratic v."""
    n = disc2.n_sigma
    rng = np.random.default_rng(1)
    for p, f in enumerate(disc2.connector.polygon_to_face):
        fe = disc2.face_elems[int(f)]
        pp = disc2.pplates[p]
        B = local_b1_sigma(fe, pp, disc2.surface.frame, n)
        a = rng.normal(size=3)
        cv = rng.normal(size=(6, 3))

        def v(x):
            return fe.basis.values(fe.to_local(x))[:, :6] @ cv

        dv = np.column_stack([fe.dofs_of(lambda x, c=c: v(x)[:, c]) for c in range(3)]).ravel()
        q = fe.quad
        psi = pp.basis.values(disc2.surface.frame.to_local(q.points)) @ a
        exact = q.integrate(psi * (v(q.points) @ n))
        assert (pp.dof_matrix @ a) @ B @ dv == pytest.approx(exact, rel=1e-12)


def test_block_structure_and_adjoints(disc2):
    sysm = assemble(disc2, PARAMS)
    K = sysm.matrix.tocsr()
    lay = disc2.layout
    bl = sysm.blocks
    u, p, phi, w = (lay.block(k) for k in ("u", "p", "phi", "w"))
    pq = slice(lay.offsets["p"], lay.offsets["w"])
    # B1 appears below the diagonal and its exact transpose above it
    assert abs(K[pq, u] - K[u, pq].T).max() == 0.0
    assert abs(K[pq, u] - bl["B1"]).max() == 0.0
    # no direct u-w or p-w coupling
    assert K[u, w].nnz == 0 and K[w, u].nnz == 0
    assert K[p, w].nnz == 0 and K[w, p].nnz == 0
    # plate coupling pair: symmetric part from b_2, antisymmetric part from b_3
    top, bottom = K[phi, w].toarray(), K[w, phi].toarray()
    b2, b3 = 0.5 * (top + bottom.T), 0.5 * (top - bottom.T)
    bl2 = assemble_blocks(disc2, PARAMS.replace(alpha=1e-300))
    np.testing.assert_allclose(b3, bl2["B23"][lay.n_p:].toarray(), atol=1e-14)
    assert np.abs(b2).max() > 0
    # pressure block carries −C1
    assert abs(K[pq, pq] + bl["C1"]).max() == 0.0


def test_spectral_structure(disc2):
    bl = assemble_blocks(disc2, PARAMS)
    lay = disc2.layout
    free = lay.free
    fu = free[free < lay.n_u]
    A = bl["A"][fu][:, fu].toarray()
    assert np.abs(A - A.T).max() < 1e-13
    assert np.linalg.eigvalsh(A).min() > 0
    C2 = bl["C2"].toarray()
    assert np.abs(C2 - C2.T).max() < 1e-13
    assert np.linalg.eigvalsh(C2).min() > 0
    C1 = bl["C1"][lay.n_p:, lay.n_p:].toarray()
    ev = np.linalg.eigvalsh(C1)
    assert ev.min() > -1e-13 * ev.max()


def _poly_case(params):
    """Fields inside every discrete space: P_2 solenoidal u, P_1 p and φ, P_2 w."""

    def u(x):
        X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
        return np.column_stack([Y**2 + Z, X * Z, X**2 + Y])

    def grad_u(x):
        X, Y, Z = x[:, 0], x[:, 1], x[:, 2]
        J = np.zeros((len(x), 3, 3))
        J[:, 0, 1], J[:, 0, 2] = 2 * Y, 1.0
        J[:, 1, 0], J[:, 1, 2] = Z, X
        J[:, 2, 0], J[:, 2, 1] = 2 * X, 1.0
        return J

    def lap_u(x):
        return np.tile([2.0, 0.0, 2.0], (len(x), 1))

    def p(x):
        return 1 + x[:, 0] - 2 * x[:, 1] + x[:, 2]

    def grad_p(x):
        return np.tile([1.0, -2.0, 1.0], (len(x), 1))

    def w(xi):
        return xi[:, 0] ** 2 - xi[:, 0] * xi[:, 1] + 0.3 * xi[:, 1]

    def grad_w(xi):
        return np.column_stack([2 * xi[:, 0] - xi[:, 1], -xi[:, 0] + 0.3])

    def hess_w(xi):
        return np.tile([[2.0, -1.0], [-1.0, 0.0]], (len(xi), 1, 1))

    def phi(xi):
        return 0.5 + xi[:, 0] - xi[:, 1]

    def grad_phi(xi):
        return np.tile([1.0, -1.0], (len(xi), 1))

    def zero(x):
        return np.zeros(len(x))

    return build_case(
        params, u=u, grad_u=grad_u, lap_u=lap_u, div_u=zero, p=p, grad_p=grad_p, w=w, grad_w=grad_w,
        hess_w=hess_w, bilap_w=zero, phi=phi, grad_phi=grad_phi, lap_phi=zero,
    )


@pytest.mark.parametrize("n", [2, 3])
def test_polynomial_patch_test(n):
    """The coupled discrete solution reproduces fields lying in the discrete spaces."""
    disc = discretize(tag_boundaries(generate_cube_mesh(n), example1_rule()))
    case = _poly_case(PARAMS)
    system = assemble(disc, PARAMS, case.load_data())
    fields = solve(system, SolverConfig())
    lay = disc.layout
    x_ref = np.concatenate([
        interpolate_u(disc, case.u, case.div_u),
        np.zeros(lay.n_p),
        interpolate_phi(disc, case.phi),
        interpolate_w(disc, case.w, case.grad_w),
    ])
    for name in ("u", "phi", "w"):
        np.testing.assert_allclose(fields.x[lay.block(name)], x_ref[lay.block(name)], atol=1e-9)
    rep = compute_errors(disc, fields, case)
    for e in (rep.e_u, rep.e_p, rep.e_w, rep.e_phi):
        assert e < 1e-9


def test_interpolant_errors_vanish_for_polynomials(disc2):
    """Errors of the exact interpolant of a polynomial case are round-off."""
    case = _poly_case(PARAMS)
    lay = disc2.layout
    x = np.zeros(lay.size)
    x[lay.block("u")] = interpolate_u(disc2, case.u, case.div_u)
    for el, pel in zip(disc2.cells, disc2.pcells):
        # L² projection of a P_1 pressure onto the cell monomials
        q = el.quad
        V = el.basis.values(q.points)[:, :4]
        x[pel.dofs] = np.linalg.solve(el.mass1, q.integrate(case.p(q.points)[:, None] * V))
    x[lay.block("phi")] = interpolate_phi(disc2, case.phi)
    x[lay.block("w")] = interpolate_w(disc2, case.w, case.grad_w)

    class F:
        pass

    F.x, F.iterations = x, 0
    rep = compute_errors(disc2, F, case)
    assert max(rep.e_u, rep.e_p, rep.e_w, rep.e_phi) < 1e-9


def test_zero_data_gives_zero_solution(disc2):
    fields = solve(assemble(disc2, PARAMS, LoadData()), SolverConfig())
    assert np.abs(fields.x).max() == 0.0


def test_inf_sup_parts(disc2):
    both = inf_sup_constant(disc2)
    p_only = inf_sup_constant(disc2, "p")
    phi_only = inf_sup_constant(disc2, "phi")
    assert 0 < both <= min(p_only, phi_only) + 1e-12
    # frozen values on the n = 2 cube
    assert p_only == pytest.approx(0.2543608397625487, rel=1e-8)
    assert phi_only == pytest.approx(0.09907247856986175, rel=1e-8)
    with pytest.raises(ConfigurationError):
        inf_sup_constant(disc2, "w")


def test_reduced_system_is_nonsingular(disc2):
    K, b = assemble(disc2, PARAMS).reduced()
    lu = spla.splu(K.tocsc())
    assert np.all(np.isfinite(lu.solve(np.ones(K.shape[0]))))
