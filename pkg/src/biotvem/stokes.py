"""Enhanced divergence-free Stokes virtual element at k = 2.

Local DOFs of a cell, in this order:

* three Cartesian values at each cell vertex,
* three values at each edge midpoint (the single Gauss-Lobatto interior point),
* three face moments ``(1/h_F) ∫_F v_c`` per face,
* divergence moments ``(1/h_K) ∫_K div v m_α`` for the non-constant ``m_α`` of M_1(K).

Vector DOF ``3 * s + c`` belongs to scalar entity slot ``s`` (vertices, then
edges, then faces) and component ``c``.  At k = 2 the curl moments are
absent because x ∧ P_{k-2} reduces to x ∧ P_0 only for k >= 3.

Vector polynomials are stored component-major over the cell monomials:
entry ``c * n + β`` is the coefficient of ``m_β e_c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .basis import (
    MonomialBasis,
    QuadRule,
    complement_basis,
    gradient_coefficients,
    n_monomials,
    polygon_area_vector,
    quad_polygon,
    quad_polyhedron,
)
from .exceptions import ElementError

K_DEGREE = 2
QUAD_EXACTNESS = 6


def _solve(A, B, what):
    try:
        lu = sla.lu_factor(A, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ElementError(f"{what}: {exc}") from None
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-13 * np.max(np.abs(np.diag(lu[0]))):
        raise ElementError(f"{what}: singular local system")
    return sla.lu_solve(lu, B)


# ------------------------------------------------------------------ faces


@dataclass
class StokesFaceElement:
    """Scalar space B^2(F) with its projectors in the face monomial basis.

    Face DOFs: values at the N loop vertices, values at the N edge midpoints
    (edge ``j`` joins loop entries ``j`` and ``j+1``), then ``(1/h_F) ∫_F v``.
    """

    face: int
    loop: np.ndarray
    centroid: np.ndarray
    normal: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    h: float
    area: float
    quad: QuadRule
    basis: MonomialBasis
    pi_nabla: np.ndarray
    pi0_3: np.ndarray
    pi0_2: np.ndarray
    mass: np.ndarray

    @property
    def n_dofs(self):
        return 2 * len(self.loop) + 1

    def to_local(self, x):
        d = np.atleast_2d(x) - self.centroid
        return np.column_stack([d @ self.t1, d @ self.t2])

    def dofs_of(self, fun):
        """DOF vector of a scalar function of 3D points."""
        mids = 0.5 * (self.loop + np.roll(self.loop, -1, axis=0))
        vals = np.concatenate([fun(self.loop), fun(mids)])
        mom = self.quad.integrate(fun(self.quad.points)) / self.h
        return np.append(vals, mom)


def build_face_projectors(mesh, f: int, k: int = K_DEGREE) -> StokesFaceElement:
    if k != K_DEGREE:
        raise ElementError("only k = 2 is implemented")
    loop = np.asarray(mesh.vertices[mesh.faces[f]], float)
    N = len(loop)
    c = mesh.face_centroids[f]
    av = polygon_area_vector(loop)
    n = av / np.linalg.norm(av)
    t1 = loop[1] - loop[0]
    t1 = t1 / np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    h = float(mesh.face_diameters[f])
    quad = quad_polygon(loop, QUAD_EXACTNESS, check=False)
    xi = np.column_stack([(loop - c) @ t1, (loop - c) @ t2])
    qxi = np.column_stack([(quad.points - c) @ t1, (quad.points - c) @ t2])
    B3 = MonomialBasis(2, k + 1, np.zeros(2), h)
    n2 = n_monomials(2, k)
    n3 = n_monomials(2, k + 1)
    nd = 2 * N + 1
    imom = 2 * N

    V = B3.values(qxi)
    H = quad.integrate(V[:, :, None] * V[:, None, :])
    Gr = B3.gradients(qxi)[:, :n2]
    G = quad.integrate(np.einsum("qad,qbd->qab", Gr, Gr))
    lap = np.trace(B3.hessians(np.zeros((1, 2)))[0, :n2], axis1=1, axis2=2)

    rhs = np.zeros((n2, nd))
    rhs[:, imom] = -lap * h * 1.0
    bnd_m = np.zeros(n2)
    bnd_v = np.zeros(nd)
    for j in range(N):
        a, b = xi[j], xi[(j + 1) % N]
        L = np.linalg.norm(b - a)
        t = (b - a) / L
        nu = np.array([t[1], -t[0]])
        pts = np.array([a, 0.5 * (a + b), b])
        g = B3.gradients(pts)[:, :n2] @ nu
        ia, im, ib = j, N + j, (j + 1) % N
        # Simpson is exact for the cubic integrand (quadratic trace × linear flux)
        rhs[:, ia] += L / 6 * g[0]
        rhs[:, im] += L / 6 * 4 * g[1]
        rhs[:, ib] += L / 6 * g[2]
        mv = B3.values(pts)[:, :n2]
        bnd_m += L / 6 * (mv[0] + 4 * mv[1] + mv[2])
        bnd_v[[ia, im, ib]] += L / 6 * np.array([1.0, 4.0, 1.0])
    G[0] = bnd_m
    rhs[0] = bnd_v
    pi_nabla = _solve(G, rhs, f"face {f} Π^∇")

    mom = np.zeros((n3, nd))
    mom[0, imom] = h
    mom[1:] = H[1:, :n2] @ pi_nabla
    pi0_3 = _solve(H, mom, f"face {f} Π⁰_3")
    pi0_2 = _solve(H[:n2, :n2], H[:n2] @ pi0_3, f"face {f} Π⁰_2")
    return StokesFaceElement(
        face=f, loop=loop, centroid=c, normal=n, t1=t1, t2=t2, h=h, area=float(mesh.face_areas[f]),
        quad=quad, basis=B3, pi_nabla=pi_nabla, pi0_3=pi0_3, pi0_2=pi0_2, mass=H,
    )


# ------------------------------------------------------------------ cells


@dataclass
class PressureElement:
    """Discontinuous P_1(K) pressure in the scaled cell monomials."""

    cell: int
    basis: MonomialBasis
    dofs: np.ndarray

    @property
    def n_dofs(self):
        return len(self.dofs)


@dataclass
class StokesCellElement:
    """Projectors and local data of V_h^2(K).

    Matrix shapes (``nd`` local DOFs): ``pi_nabla`` and ``pi0`` are (30, nd),
    ``grad_proj`` is (36, nd) with row ``(c * 3 + j) * 4 + α`` holding the
    P_1 coefficient of ``∂_j v_c``, ``div_rep`` is (4, nd), ``dof_matrix``
    is (nd, 30).
    """

    cell: int
    center: np.ndarray
    h: float
    volume: float
    basis: MonomialBasis
    quad: QuadRule
    vertices: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    face_signs: np.ndarray
    face_elems: list
    face_slots: list
    global_dofs: np.ndarray
    pi_nabla: np.ndarray
    pi0: np.ndarray
    grad_proj: np.ndarray
    div_rep: np.ndarray
    dof_matrix: np.ndarray
    mass3: np.ndarray
    grad_int: np.ndarray = field(repr=False)

    @property
    def n_dofs(self):
        return len(self.global_dofs)

    @property
    def n_div(self):
        return n_monomials(3, K_DEGREE - 1) - 1

    @property
    def div_offset(self):
        return 3 * (len(self.vertices) + len(self.edges) + len(self.faces))

    @property
    def mass_vec(self):
        n2 = n_monomials(3, K_DEGREE)
        return np.kron(np.eye(3), self.mass3[:n2, :n2])

    @property
    def mass1(self):
        n1 = n_monomials(3, K_DEGREE - 1)
        return self.mass3[:n1, :n1]

    def dofs_of(self, u, divu=None):
        """Local DOF vector of a vector field ``u`` (points -> (N, 3)).

        ``divu`` gives its divergence; when omitted the divergence moments
        are set to zero, which is exact for solenoidal fields.
        """
        nv, ne = len(self.vertices), len(self.edges)
        out = np.zeros(self.n_dofs)
        X = self._vertex_coords
        out[: 3 * nv] = u(X).ravel()
        out[3 * nv: 3 * (nv + ne)] = u(self._edge_mids).ravel()
        for s, fe in enumerate(self.face_elems):
            q = fe.quad
            out[3 * (nv + ne + s): 3 * (nv + ne + s) + 3] = q.integrate(u(q.points)) / fe.h
        if divu is not None:
            m = self.basis.values(self.quad.points)[:, 1: 1 + self.n_div]
            out[self.div_offset:] = self.quad.integrate(divu(self.quad.points)[:, None] * m) / self.h
        return out


def _entity_global_dofs(mesh, verts, edges, faces, k):
    nv, ne, nf = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    ents = np.concatenate([verts, nv + edges, nv + ne + faces])
    vec = (3 * ents[:, None] + np.arange(3)).ravel()
    cell = 3 * (nv + ne + nf + k) + np.arange(3)
    return np.concatenate([vec, cell])


def build_cell_element(mesh, k: int, face_elems, degree: int = K_DEGREE) -> StokesCellElement:
    """Assemble every projector of cell ``k`` from its face elements.

    ``face_elems`` maps a global face index to its StokesFaceElement.
    """
    if degree != K_DEGREE:
        raise ElementError("only k = 2 is implemented")
    faces = np.asarray(mesh.cells[k])
    signs = np.asarray(mesh.cell_face_signs[k])
    verts = np.asarray(mesh.cell_vertices[k])
    edges = np.asarray(mesh.cell_edges[k])
    nv, ne, nf = len(verts), len(edges), len(faces)
    vpos = {int(v): i for i, v in enumerate(verts)}
    epos = {int(e): i for i, e in enumerate(edges)}
    nd = 3 * (nv + ne + nf) + 3
    idiv = 3 * (nv + ne + nf)

    xK = mesh.cell_centroids[k]
    hK = float(mesh.cell_diameters[k])
    basis = MonomialBasis(3, degree + 1, xK, hK)
    quad = quad_polyhedron(mesh.cell_face_loops(k), QUAD_EXACTNESS, check_closed=False)
    n1 = n_monomials(3, degree - 1)
    n2 = n_monomials(3, degree)
    n3 = n_monomials(3, degree + 1)
    V = basis.values(quad.points)
    M33 = quad.integrate(V[:, :, None] * V[:, None, :])
    M1 = M33[:n1, :n1]

    # face integrals ∫_F v_c m_α for all cell monomials, as rows over cell DOFs
    # Bj[j, c, α] = Σ_F n_j ∫_F v_c m_α ; A0[c] = Σ_F ∫_F v_c
    Bj = np.zeros((3, 3, n3, nd))
    A0 = np.zeros((3, nd))
    bnd_mono = np.zeros(n3)
    slots = []
    for s, (f, sg) in enumerate(zip(faces, signs)):
        fe = face_elems[int(f)]
        fv = mesh.faces[f]
        fedges = mesh.face_edges[f]
        N = len(fv)
        slot = np.empty(fe.n_dofs, dtype=int)
        slot[:N] = [vpos[int(v)] for v in fv]
        slot[N: 2 * N] = [nv + epos[int(e)] for e in fedges]
        slot[2 * N] = nv + ne + s
        slots.append(slot)
        q = fe.quad
        Tf = fe.basis.values(fe.to_local(q.points)) @ fe.pi0_3
        Q = basis.values(q.points)
        I = (q.weights[:, None] * Q).T @ Tf  # (n3, face dofs)
        bnd_mono += q.integrate(Q)
        nout = sg * fe.normal
        for c in range(3):
            cols = 3 * slot + c
            A0[c, 3 * slot[2 * N] + c] += fe.h
            for j in range(3):
                Bj[j, c][:, cols] += nout[j] * I

    Bn = Bj[0, 0] + Bj[1, 1] + Bj[2, 2]

    # divergence representation in P_1(K)
    mom = np.zeros((n1, nd))
    mom[0] = Bn[0]
    for a in range(1, n1):
        mom[a, idiv + a - 1] = hK
    div_rep = _solve(M1, mom, f"cell {k} divergence")

    # ∫_K v · ∇m_α
    grad_int = -M33[:, :n1] @ div_rep + Bn
    intv = np.array([hK * grad_int[1 + c] for c in range(3)])

    # Π^∇: component-wise H¹ projection with boundary-mean fixing
    Dm = [basis.derivative_matrix(j) for j in range(3)]
    Gr = basis.gradients(quad.points)[:, :n2]
    Gn = quad.integrate(np.einsum("qad,qbd->qab", Gr, Gr))
    lap = np.trace(basis.hessians(xK[None])[0, :n2], axis1=1, axis2=2)
    Gn[0] = bnd_mono[:n2]
    pi_nabla = np.zeros((3 * n2, nd))
    for c in range(3):
        rhs = -lap[:, None] * intv[c][None, :]
        for j in range(3):
            rhs += Dm[j][:n3, :n2].T @ Bj[j, c]
        rhs[0] = A0[c]
        pi_nabla[c * n2:(c + 1) * n2] = _solve(Gn, rhs, f"cell {k} Π^∇")

    # Π⁰ via the split ∇P_3 ⊕ x̂ ∧ P_1 of vector P_2
    Mvec = np.kron(np.eye(3), M33[:n2, :n2])
    gcoef = gradient_coefficients(basis, degree)
    comp = complement_basis(MonomialBasis(3, degree, xK, hK), degree).coeffs
    C = np.hstack([gcoef, comp])
    if np.linalg.matrix_rank(C) != 3 * n2:
        raise ElementError(f"cell {k}: gradient/complement split is rank deficient")
    mom_basis = np.vstack([grad_int[1:], comp.T @ Mvec @ pi_nabla])
    mom_mono = np.linalg.solve(C.T, mom_basis)
    pi0 = _solve(Mvec, mom_mono, f"cell {k} Π⁰")

    # Π⁰_1 ∇v
    grad_proj = np.zeros((9 * n1, nd))
    for c in range(3):
        for j in range(3):
            rhs = -np.outer(Dm[j][0, :n1], intv[c]) + Bj[j, c][:n1]
            r = (c * 3 + j) * n1
            grad_proj[r: r + n1] = _solve(M1, rhs, f"cell {k} gradient projector")

    elem = StokesCellElement(
        cell=k, center=xK, h=hK, volume=float(mesh.cell_volumes[k]), basis=basis, quad=quad,
        vertices=verts, edges=edges, faces=faces, face_signs=signs,
        face_elems=[face_elems[int(f)] for f in faces], face_slots=slots,
        global_dofs=_entity_global_dofs(mesh, verts, edges, faces, k),
        pi_nabla=pi_nabla, pi0=pi0, grad_proj=grad_proj, div_rep=div_rep,
        dof_matrix=np.zeros((nd, 3 * n2)), mass3=M33, grad_int=grad_int,
    )
    elem._vertex_coords = mesh.vertices[verts]
    ev = mesh.edges[edges]
    elem._edge_mids = 0.5 * (mesh.vertices[ev[:, 0]] + mesh.vertices[ev[:, 1]])
    elem.dof_matrix = _monomial_dofs(elem)
    return elem


def _monomial_dofs(elem):
    """DOFs of every vector monomial ``m_β e_c`` (columns, component-major)."""
    n2 = n_monomials(3, K_DEGREE)
    n1 = n_monomials(3, K_DEGREE - 1)
    B = elem.basis
    nv, ne = len(elem.vertices), len(elem.edges)
    nd = elem.n_dofs
    D = np.zeros((nd, 3 * n2))
    pv = B.values(elem._vertex_coords)[:, :n2]
    pe = B.values(elem._edge_mids)[:, :n2]
    pf = [fe.quad.integrate(B.values(fe.quad.points)[:, :n2]) / fe.h for fe in elem.face_elems]
    q = elem.quad
    dg = B.gradients(q.points)[:, :n2]  # (nq, n2, 3)
    mq = B.values(q.points)[:, 1:n1]
    for c in range(3):
        cols = slice(c * n2, (c + 1) * n2)
        D[3 * np.arange(nv) + c, cols] = pv
        D[3 * (nv + np.arange(ne)) + c, cols] = pe
        for s in range(len(pf)):
            D[3 * (nv + ne + s) + c, cols] = pf[s]
        D[elem.div_offset:, cols] = q.integrate(dg[:, :, c][:, None, :] * mq[:, :, None]) / elem.h
    return D


def build_pressure_element(mesh, k: int, offset: int = 0) -> PressureElement:
    n1 = n_monomials(3, K_DEGREE - 1)
    basis = MonomialBasis(3, K_DEGREE - 1, mesh.cell_centroids[k], float(mesh.cell_diameters[k]))
    return PressureElement(cell=k, basis=basis, dofs=offset + n1 * k + np.arange(n1))


# ---------------------------------------------------------- local forms


def stabilization_matrices(elem: StokesCellElement, rho_tau: float = 1.0, mu: float = 1.0):
    """DOFI-DOFI mass stabilizer and diagonal-recipe gradient stabilizer."""
    nd = elem.n_dofs
    I = np.eye(nd)
    R0 = I - elem.dof_matrix @ elem.pi0
    S0 = rho_tau * elem.h**3 * (R0.T @ R0)
    Rn = I - elem.dof_matrix @ elem.pi_nabla
    Kc = gradient_consistency(elem)
    d = np.maximum(np.diag(Kc), elem.h)
    Sn = mu * (Rn.T @ (d[:, None] * Rn))
    return 0.5 * (S0 + S0.T), 0.5 * (Sn + Sn.T)


def gradient_consistency(elem: StokesCellElement):
    Mten = np.kron(np.eye(9), elem.mass1)
    return elem.grad_proj.T @ Mten @ elem.grad_proj


def local_stokes_a(elem: StokesCellElement, params) -> np.ndarray:
    rho_tau = params.rho_f / params.tau
    mass = elem.pi0.T @ elem.mass_vec @ elem.pi0
    S0, Sn = stabilization_matrices(elem, rho_tau, params.mu)
    A = rho_tau * mass + S0 + params.mu * gradient_consistency(elem) + Sn
    return 0.5 * (A + A.T)


def local_b1_div(elem: StokesCellElement, pelem: PressureElement | None = None) -> np.ndarray:
    """Rows: pressure monomials; entry −∫_K m_α div φ_i."""
    return -elem.mass1 @ elem.div_rep


def local_rhs_F(elem: StokesCellElement, f) -> np.ndarray:
    q = elem.quad
    n2 = n_monomials(3, K_DEGREE)
    m = elem.basis.values(q.points)[:, :n2]
    fv = np.asarray(f(q.points), float).reshape(-1, 3)
    mom = np.concatenate([q.integrate(fv[:, c:c + 1] * m) for c in range(3)])
    return elem.pi0.T @ mom


def eval_vector_poly(elem: StokesCellElement, coeffs, x):
    """Evaluate a component-major vector P_2 coefficient array at points."""
    n2 = n_monomials(3, K_DEGREE)
    m = elem.basis.values(x)[:, :n2]
    return np.column_stack([m @ coeffs[c * n2:(c + 1) * n2] for c in range(3)])


def eval_vector_poly_grad(elem: StokesCellElement, coeffs, x):
    """Jacobian ``J[:, c, j] = ∂_j v_c`` of a vector P_2 polynomial."""
    n2 = n_monomials(3, K_DEGREE)
    g = elem.basis.gradients(x)[:, :n2]
    return np.stack([np.einsum("qbj,b->qj", g, coeffs[c * n2:(c + 1) * n2]) for c in range(3)], axis=1)
