"""C¹ plate virtual element W_h^2 and the plate pressure-moment space R_h^1.

Both live on polygons of the flat surface mesh, in its 2D tangent frame.

Plate DOFs per polygon vertex ``z`` (local slot ``3 i + d``): ``w(z)``,
``h_z ∂_1 w(z)`` and ``h_z ∂_2 w(z)``.  The trace of ``w`` on an edge is the
cubic Hermite interpolant of the endpoint values and tangential derivatives;
the normal derivative is linear between the endpoint values.

Pressure-moment DOFs: one vertex value per polygon vertex, piecewise linear
edge traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import MonomialBasis, QuadRule, n_monomials, quad_polygon, segment_rule
from .exceptions import ElementError, GeometryError

QUAD_EXACTNESS = 6


def _hermite(s):
    """Cubic Hermite shape functions on [0, 1] and their derivatives."""
    s = np.asarray(s, float)
    h = np.stack([1 - 3 * s**2 + 2 * s**3, s - 2 * s**2 + s**3, 3 * s**2 - 2 * s**3, -(s**2) + s**3], axis=-1)
    dh = np.stack([-6 * s + 6 * s**2, 1 - 4 * s + 3 * s**2, 6 * s - 6 * s**2, -2 * s + 3 * s**2], axis=-1)
    return h, dh


def _solve(A, B, what):
    try:
        x = np.linalg.solve(A, B)
    except np.linalg.LinAlgError:
        raise GeometryError(f"{what}: singular local system") from None
    return x


@dataclass
class _Edge:
    ia: int
    ib: int
    length: float
    tangent: np.ndarray
    normal: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _polygon_edges(xy):
    out = []
    N = len(xy)
    for j in range(N):
        a, b = xy[j], xy[(j + 1) % N]
        L = float(np.linalg.norm(b - a))
        t = (b - a) / L
        out.append(_Edge(j, (j + 1) % N, L, t, np.array([t[1], -t[0]]), a, b))
    return out


@dataclass
class PlateElement:
    """Projectors of W_h^2(F).

    ``pi`` (6, 3N) is Π^{∇²}, which also serves as Π⁰_2 at this degree.
    ``grad_proj`` (6, 3N) holds the P_1 coefficients of Π⁰_1 ∂_j w in rows
    ``3 j + α``.  ``dof_matrix`` (3N, 6) holds the DOFs of the monomials.
    """

    polygon: int
    vertices: np.ndarray
    coords: np.ndarray
    vertex_h: np.ndarray
    center: np.ndarray
    h: float
    area: float
    quad: QuadRule
    basis: MonomialBasis
    pi: np.ndarray
    grad_proj: np.ndarray
    dof_matrix: np.ndarray
    mass: np.ndarray
    hess_gram: np.ndarray

    @property
    def n_dofs(self):
        return 3 * len(self.vertices)

    @property
    def pi0(self):
        return self.pi

    @property
    def global_dofs(self):
        return (3 * self.vertices[:, None] + np.arange(3)).ravel()

    def dofs_of(self, w, grad):
        """Local DOF vector of a function given by value and gradient callables."""
        g = grad(self.coords) * self.vertex_h[:, None]
        return np.column_stack([w(self.coords), g]).ravel()

    def edge_trace(self, dofs, j, s):
        """Hermite trace of ``w`` on local edge ``j`` at parameters ``s``."""
        e = _polygon_edges(self.coords)[j]
        h, _ = _hermite(s)
        return h @ self._edge_hermite_data(dofs, e)

    def _edge_hermite_data(self, dofs, e):
        d = np.asarray(dofs).reshape(-1, 3)
        ga = d[e.ia, 1:] / self.vertex_h[e.ia]
        gb = d[e.ib, 1:] / self.vertex_h[e.ib]
        return np.array([d[e.ia, 0], e.length * ga @ e.tangent, d[e.ib, 0], e.length * gb @ e.tangent])


def _hermite_rows(e, vh, nd, s):
    """Rows mapping local DOFs to trace values, tangential and normal derivatives at ``s``."""
    h, dh = _hermite(s)
    val = np.zeros((len(s), nd))
    dt = np.zeros((len(s), nd))
    dn = np.zeros((len(s), nd))
    for side, (i, hv, hd) in enumerate([(e.ia, h[:, 0], dh[:, 0]), (e.ib, h[:, 2], dh[:, 2])]):
        ht = h[:, 1] if side == 0 else h[:, 3]
        dht = dh[:, 1] if side == 0 else dh[:, 3]
        lin = (1 - s) if side == 0 else s
        val[:, 3 * i] += hv
        dt[:, 3 * i] += hd / e.length
        for d in range(2):
            val[:, 3 * i + 1 + d] += ht * e.length * e.tangent[d] / vh[i]
            dt[:, 3 * i + 1 + d] += dht * e.tangent[d] / vh[i]
            dn[:, 3 * i + 1 + d] += lin * e.normal[d] / vh[i]
    return val, dt, dn


def hessian_edge_terms(xy, vh, H, quadrature=False):
    """Rows of ``∫_{∂F} ∇w · H ν`` over the local DOFs for a constant matrix ``H``.

    With ``quadrature=False`` the tangential part is integrated exactly as
    ``w_b - w_a``; otherwise both parts use Gauss quadrature of the traces.
    """
    N = len(xy)
    nd = 3 * N
    out = np.zeros(nd)
    for e in _polygon_edges(xy):
        nHn = e.normal @ H @ e.normal
        tHn = e.tangent @ H @ e.normal
        if quadrature:
            s, w = segment_rule(5)
            _, dt, dn = _hermite_rows(e, vh, nd, s)
            out += e.length * (w @ (nHn * dn + tHn * dt))
        else:
            for i in (e.ia, e.ib):
                for d in range(2):
                    out[3 * i + 1 + d] += nHn * e.length / 2 * e.normal[d] / vh[i]
            out[3 * e.ib] += tHn
            out[3 * e.ia] -= tHn
    return out


def build_plate_element(surface, p: int, k: int = 2) -> PlateElement:
    if k != 2:
        raise ElementError("only k = 2 is implemented")
    verts = np.asarray(surface.polygons[p])
    xy = surface.vertices[verts]
    vh = surface.vertex_h[verts]
    N = len(verts)
    nd = 3 * N
    xF = surface.centroids[p]
    hF = float(surface.diameters[p])
    basis = MonomialBasis(2, 2, xF, hF)
    n2 = n_monomials(2, 2)
    quad = quad_polygon(xy, QUAD_EXACTNESS, check=True)
    V = basis.values(quad.points)
    M = quad.integrate(V[:, :, None] * V[:, None, :])
    Hs = basis.hessians(xF[None])[0]  # (6, 2, 2), constant
    area = float(surface.areas[p])
    G = area * np.einsum("aij,bij->ab", Hs, Hs)

    # Π^{∇²}: Hessian Gram on degree-2 rows, vertex averages fix the P_1 kernel
    A = G.copy()
    rhs = np.zeros((n2, nd))
    for b in range(3, n2):
        rhs[b] = hessian_edge_terms(xy, vh, Hs[b])
    vals = basis.values(xy)
    grads = basis.gradients(xy)
    A[0] = vals.mean(axis=0)
    A[1] = grads[:, :, 0].mean(axis=0)
    A[2] = grads[:, :, 1].mean(axis=0)
    rhs[0, 3 * np.arange(N)] = 1.0 / N
    rhs[1, 3 * np.arange(N) + 1] = 1.0 / (N * vh)
    rhs[2, 3 * np.arange(N) + 2] = 1.0 / (N * vh)
    pi = _solve(A, rhs, f"polygon {p} Π^∇²")

    # Π⁰_1 ∇w by parts; ∫_F w comes from the enhancement (Π⁰_2 = Π^∇²)
    n1 = n_monomials(2, 1)
    intw = M[0] @ pi
    s, wq = segment_rule(5)
    grad_proj = np.zeros((2 * n1, nd))
    for j in range(2):
        Dj = basis.derivative_matrix(j)
        rr = -np.outer(Dj[0, :n1], intw)
        for e in _polygon_edges(xy):
            val, _, _ = _hermite_rows(e, vh, nd, s)
            x = e.a + s[:, None] * (e.b - e.a)
            m = basis.values(x)[:, :n1]
            rr += e.length * e.normal[j] * (m * wq[:, None]).T @ val
        grad_proj[j * n1:(j + 1) * n1] = _solve(M[:n1, :n1], rr, f"polygon {p} gradient projector")

    D = np.zeros((nd, n2))
    D[3 * np.arange(N)] = vals
    D[3 * np.arange(N) + 1] = grads[:, :, 0] * vh[:, None]
    D[3 * np.arange(N) + 2] = grads[:, :, 1] * vh[:, None]
    return PlateElement(
        polygon=p, vertices=verts, coords=xy, vertex_h=vh, center=xF, h=hF, area=area, quad=quad,
        basis=basis, pi=pi, grad_proj=grad_proj, dof_matrix=D, mass=M, hess_gram=G,
    )


@dataclass
class PlatePressureElement:
    """Projectors of R_h^1(F): ``pi`` (3, N) is Π^∇_1 = Π⁰_1, ``grad`` (2, N) is Π⁰_0 ∇."""

    polygon: int
    vertices: np.ndarray
    coords: np.ndarray
    center: np.ndarray
    h: float
    area: float
    quad: QuadRule
    basis: MonomialBasis
    pi: np.ndarray
    grad: np.ndarray
    dof_matrix: np.ndarray
    mass: np.ndarray

    @property
    def n_dofs(self):
        return len(self.vertices)

    @property
    def pi0(self):
        return self.pi

    @property
    def global_dofs(self):
        return np.asarray(self.vertices)


def build_plate_pressure_element(surface, p: int, ell: int = 1) -> PlatePressureElement:
    if ell != 1:
        raise ElementError("only ℓ = 1 is implemented")
    verts = np.asarray(surface.polygons[p])
    xy = surface.vertices[verts]
    N = len(verts)
    xF = surface.centroids[p]
    hF = float(surface.diameters[p])
    basis = MonomialBasis(2, 1, xF, hF)
    quad = quad_polygon(xy, QUAD_EXACTNESS, check=True)
    V = basis.values(quad.points)
    M = quad.integrate(V[:, :, None] * V[:, None, :])
    gr = basis.gradients(xF[None])[0]  # (3, 2)
    area = float(surface.areas[p])
    A = area * gr @ gr.T
    rhs = np.zeros((3, N))
    bnd_m = np.zeros(3)
    bnd_v = np.zeros(N)
    for e in _polygon_edges(xy):
        flux = gr @ e.normal
        rhs[:, e.ia] += flux * e.length / 2
        rhs[:, e.ib] += flux * e.length / 2
        bnd_m += e.length / 2 * (basis.values(e.a)[0] + basis.values(e.b)[0])
        bnd_v[[e.ia, e.ib]] += e.length / 2
    A[0] = bnd_m
    rhs[0] = bnd_v
    pi = _solve(A, rhs, f"polygon {p} Π^∇_1")
    grad = gr.T @ pi
    D = basis.values(xy)
    return PlatePressureElement(
        polygon=p, vertices=verts, coords=xy, center=xF, h=hF, area=area, quad=quad, basis=basis,
        pi=pi, grad=grad, dof_matrix=D, mass=M,
    )


# ---------------------------------------------------------- local forms


def _dofi(elem):
    R = np.eye(elem.n_dofs) - elem.dof_matrix @ elem.pi
    return R.T @ R


def local_c1(pelem: PlatePressureElement, params) -> np.ndarray:
    S = _dofi(pelem)
    c0 = params.c0 / params.tau
    mass = pelem.pi.T @ pelem.mass @ pelem.pi + pelem.h**2 * S
    stiff = pelem.area * pelem.grad.T @ pelem.grad + S
    C = c0 * mass + params.kappa * stiff
    return 0.5 * (C + C.T)


def local_c2(elem: PlateElement, params) -> np.ndarray:
    S = _dofi(elem)
    m = params.rho_p / params.tau**3
    d = params.D / params.tau
    mass = elem.pi.T @ elem.mass @ elem.pi + elem.h**2 * S
    bend = elem.pi.T @ elem.hess_gram @ elem.pi + elem.h**-2 * S
    C = m * mass + d * bend
    return 0.5 * (C + C.T)


def local_b2_b3(pelem: PlatePressureElement, elem: PlateElement, params):
    """Pressure-DOF × plate-DOF matrices of b_2 and b_3 (no stabilization)."""
    n1 = n_monomials(2, 1)
    mean_grad = np.vstack([elem.mass[0, :n1] @ elem.grad_proj[j * n1:(j + 1) * n1] for j in range(2)])
    b2 = -(params.alpha / params.tau) * pelem.grad.T @ mean_grad
    b3 = -(1.0 / params.tau) * pelem.pi.T @ elem.mass[:n1, :] @ elem.pi
    return b2, b3


def local_rhs_G_M(pelem: PlatePressureElement, elem: PlateElement, g, m, params):
    qp = pelem.quad
    gv = np.asarray(g(qp.points), float)
    G = -pelem.pi.T @ qp.integrate(gv[:, None] * pelem.basis.values(qp.points))
    qw = elem.quad
    mv = np.asarray(m(qw.points), float)
    Mv = elem.pi.T @ qw.integrate(mv[:, None] * elem.basis.values(qw.points)) / params.tau
    return G, Mv
