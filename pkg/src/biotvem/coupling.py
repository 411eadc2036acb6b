"""Interface terms on Σ, global DOF layout and block assembly.

The global unknown is ordered u | p | φ | w:

* u: three components per vertex, edge and face, then three divergence
  moments per cell (entity-major, component-minor),
* p: four P_1 monomial coefficients per cell,
* φ: one value per surface vertex,
* w: value and two scaled gradient components per surface vertex.

The assembled operator has the block form::

    [ A    B1ᵀ       0      ]
    [ B1  -C1   (B2 + B3)ᵀ  ]
    [ 0   B2 - B3    C2     ]

where B2 and B3 map the (p, φ) block into the w block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import n_monomials
from .exceptions import AssemblyError, ConfigurationError
from .mesh import GAMMA_SIGMA, GAMMA_U, SIGMA, extract_surface
from .params import ModelParams
from .plate import (
    build_plate_element,
    build_plate_pressure_element,
    local_b2_b3,
    local_c1,
    local_c2,
    local_rhs_G_M,
)
from .stokes import (
    build_cell_element,
    build_face_projectors,
    build_pressure_element,
    local_b1_div,
    local_rhs_F,
    local_stokes_a,
)

log = logging.getLogger(__name__)

N_P = n_monomials(3, 1)


# ---------------------------------------------------------------- layout


@dataclass
class DofLayout:
    n_u: int
    n_p: int
    n_phi: int
    n_w: int
    constrained: np.ndarray
    n_vertices: int
    n_edges: int
    n_faces: int
    n_cells: int

    @property
    def offsets(self):
        o_u = 0
        o_p = self.n_u
        o_phi = o_p + self.n_p
        o_w = o_phi + self.n_phi
        return {"u": o_u, "p": o_p, "phi": o_phi, "w": o_w}

    @property
    def size(self):
        return self.n_u + self.n_p + self.n_phi + self.n_w

    def block(self, name):
        o = self.offsets[name]
        n = {"u": self.n_u, "p": self.n_p, "phi": self.n_phi, "w": self.n_w}[name]
        return slice(o, o + n)

    @property
    def free(self):
        mask = np.ones(self.size, dtype=bool)
        mask[self.constrained] = False
        return np.nonzero(mask)[0]

    def vertex_dofs(self, v):
        return 3 * np.asarray(v)[..., None] + np.arange(3)

    def edge_dofs(self, e):
        return 3 * (self.n_vertices + np.asarray(e))[..., None] + np.arange(3)

    def face_dofs(self, f):
        return 3 * (self.n_vertices + self.n_edges + np.asarray(f))[..., None] + np.arange(3)

    def split(self, x):
        return {k: x[self.block(k)] for k in ("u", "p", "phi", "w")}


def face_vector_dofs(mesh, layout: DofLayout, f: int) -> np.ndarray:
    """(face scalar DOFs, 3) array of global u indices of a face's trace."""
    loop = mesh.faces[f]
    return np.vstack([layout.vertex_dofs(loop), layout.edge_dofs(mesh.face_edges[f]), layout.face_dofs([f])])


def build_layout(mesh, surface, connector, dirichlet_tags=(GAMMA_U,)) -> DofLayout:
    if SIGMA in dirichlet_tags:
        raise ConfigurationError("Sigma faces cannot carry velocity Dirichlet conditions")
    if surface is None or surface.n_polygons == 0:
        raise ConfigurationError("layout needs a non-empty Sigma surface")
    nv, ne, nf, nc = mesh.n_vertices, mesh.n_edges, mesh.n_faces, mesh.n_cells
    n_u = 3 * (nv + ne + nf + nc)
    n_p = N_P * nc
    n_phi = surface.n_vertices
    n_w = 3 * surface.n_vertices
    lay = DofLayout(n_u, n_p, n_phi, n_w, np.zeros(0, dtype=int), nv, ne, nf, nc)
    cons = set()
    for tag in dirichlet_tags:
        for f in mesh.faces_with_tag(tag):
            cons.update(face_vector_dofs(mesh, lay, f).ravel().tolist())
    off = lay.offsets
    bv = np.nonzero(surface.boundary_vertices)[0]
    cons.update((off["phi"] + bv).tolist())
    cons.update((off["w"] + 3 * bv[:, None] + np.arange(3)).ravel().tolist())
    lay.constrained = np.array(sorted(cons), dtype=int)
    return lay


# --------------------------------------------------------- interface forms


def local_a_sigma(face_elem, gamma: float, n_sigma) -> np.ndarray:
    """γ ∫_F (Π⁰_2 u × n)·(Π⁰_2 v × n) over the face trace DOFs.

    Columns are ordered ``3 * j + c`` (face scalar DOF ``j``, component ``c``).
    """
    n = np.asarray(n_sigma, float)
    P = np.eye(3) - np.outer(n, n)
    n2 = face_elem.pi0_2.shape[0]
    S = face_elem.pi0_2.T @ face_elem.mass[:n2, :n2] @ face_elem.pi0_2
    A = gamma * np.kron(S, P)
    return 0.5 * (A + A.T)


def local_a_sigma_cross(face_elem, gamma: float, n_sigma) -> np.ndarray:
    """Same form evaluated pointwise through cross products (quadrature)."""
    n = np.asarray(n_sigma, float)
    q = face_elem.quad
    V = face_elem.basis.values(face_elem.to_local(q.points))[:, : face_elem.pi0_2.shape[0]] @ face_elem.pi0_2
    nd = V.shape[1]
    # values[q, 3 j + c, :] = φ_j e_c × n
    E = np.cross(np.eye(3), n)
    vals = (V[:, :, None, None] * E[None, None, :, :]).reshape(len(q.weights), 3 * nd, 3)
    return gamma * np.einsum("q,qad,qbd->ab", q.weights, vals, vals)


def local_b1_sigma(face_elem, ppelem, frame, n_sigma) -> np.ndarray:
    """∫_F Π⁰_1 ψ (Π⁰_2 v · n): rows ψ DOFs, columns ``3 * j + c``."""
    n = np.asarray(n_sigma, float)
    q = face_elem.quad
    V = face_elem.basis.values(face_elem.to_local(q.points))[:, : face_elem.pi0_2.shape[0]] @ face_elem.pi0_2
    xi = frame.to_local(q.points)
    Psi = ppelem.basis.values(xi) @ ppelem.pi
    M = (q.weights[:, None] * Psi).T @ V
    return np.kron(M, n[None, :])


def local_b3_coupling(b2, b3):
    """Place the plate coupling pair: returns (block(φ, w), block(w, φ))."""
    return b2 + b3, (b2 - b3).T


# ------------------------------------------------------------ discretization


@dataclass
class Discretization:
    mesh: object
    surface: object
    connector: object
    layout: DofLayout
    face_elems: dict
    cells: list
    pcells: list
    plates: list
    pplates: list

    @property
    def n_sigma(self):
        return self.surface.frame.normal


def discretize(mesh, surface=None, connector=None, dirichlet_tags=(GAMMA_U,)) -> Discretization:
    if surface is None:
        surface, connector = extract_surface(mesh)
    layout = build_layout(mesh, surface, connector, dirichlet_tags)
    face_elems = {f: build_face_projectors(mesh, f) for f in range(mesh.n_faces)}
    cells = [build_cell_element(mesh, k, face_elems) for k in range(mesh.n_cells)]
    pcells = [build_pressure_element(mesh, k, layout.offsets["p"]) for k in range(mesh.n_cells)]
    plates = [build_plate_element(surface, p) for p in range(surface.n_polygons)]
    pplates = [build_plate_pressure_element(surface, p) for p in range(surface.n_polygons)]
    return Discretization(mesh, surface, connector, layout, face_elems, cells, pcells, plates, pplates)


# ------------------------------------------------------------------ loads


@dataclass
class LoadData:
    """Right-hand-side and boundary data; any entry may be None (zero).

    ``f`` maps bulk points to (N, 3).  ``g`` and ``m`` map Σ-frame points
    to (N,).  ``traction`` maps ``(x, n)`` on Γ^σ to σn; ``sigma_traction``
    maps Σ points to an extra vector load (used by manufactured data) and
    ``sigma_flux`` maps Σ-frame points to an extra scalar load on the φ rows.
    ``u_bc`` (with optional ``div_u``), ``phi_bc`` and ``w_bc`` / ``w_grad_bc``
    give Dirichlet data.
    """

    f: Optional[Callable] = None
    g: Optional[Callable] = None
    m: Optional[Callable] = None
    traction: Optional[Callable] = None
    sigma_traction: Optional[Callable] = None
    sigma_flux: Optional[Callable] = None
    u_bc: Optional[Callable] = None
    div_u: Optional[Callable] = None
    phi_bc: Optional[Callable] = None
    w_bc: Optional[Callable] = None
    w_grad_bc: Optional[Callable] = None


def _zero(x):
    return np.zeros(len(x))


def interpolate_u(disc: Discretization, u, divu=None) -> np.ndarray:
    x = np.zeros(disc.layout.n_u)
    for el in disc.cells:
        x[el.global_dofs] = el.dofs_of(u, divu)
    return x


def interpolate_phi(disc: Discretization, phi) -> np.ndarray:
    return np.asarray(phi(disc.surface.vertices), float)


def interpolate_w(disc: Discretization, w, grad) -> np.ndarray:
    s = disc.surface
    g = grad(s.vertices) * s.vertex_h[:, None]
    return np.column_stack([w(s.vertices), g]).ravel()


def _boundary_face_load(fe, fun, normal):
    """∫_F t · Π⁰_3 v over trace DOFs ``3 * j + c``."""
    q = fe.quad
    V = fe.basis.values(fe.to_local(q.points)) @ fe.pi0_3
    t = np.asarray(fun(q.points, np.tile(normal, (len(q.weights), 1))), float).reshape(-1, 3)
    return np.einsum("q,qj,qc->jc", q.weights, V, t).ravel()


# --------------------------------------------------------------- assembly


@dataclass
class BlockSystem:
    """Global operator, right-hand side and the symmetric elimination data."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: DofLayout
    prescribed: np.ndarray
    blocks: dict = field(default_factory=dict)

    def reduced(self):
        """Free-DOF matrix and right-hand side with prescribed values lifted."""
        free = self.layout.free
        cons = self.layout.constrained
        K = self.matrix
        Kff = K[free][:, free].tocsc()
        bf = self.rhs[free] - K[free][:, cons] @ self.prescribed[cons]
        return Kff, bf

    def expand(self, xf):
        x = self.prescribed.copy()
        x[self.layout.free] = xf
        return x


class _Triplets:
    def __init__(self):
        self.r, self.c, self.v = [], [], []

    def add(self, rows, cols, M):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        self.r.append(np.repeat(rows, len(cols)))
        self.c.append(np.tile(cols, len(rows)))
        self.v.append(np.asarray(M).ravel())

    def matrix(self, shape):
        if not self.r:
            return sp.csr_matrix(shape)
        A = sp.coo_matrix((np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))), shape=shape)
        A = A.tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


def assemble_blocks(disc: Discretization, params: ModelParams, gamma_override=None, with_sigma=True):
    """Return the field blocks A, B1 (rows p|φ), C1 (p|φ), C2, B23 (φ, w), B32 (w, φ)."""
    lay = disc.layout
    mesh = disc.mesh
    nq = lay.n_p + lay.n_phi
    tA, tB1, tC1, tC2, tB23, tB32 = (_Triplets() for _ in range(6))
    for el, pel in zip(disc.cells, disc.pcells):
        g = el.global_dofs
        tA.add(g, g, local_stokes_a(el, params))
        tB1.add(pel.dofs - lay.offsets["p"], g, local_b1_div(el, pel))
    n = disc.n_sigma
    gamma = params.gamma if gamma_override is None else gamma_override
    if with_sigma:
        for p, f in enumerate(disc.connector.polygon_to_face):
            fe = disc.face_elems[int(f)]
            gd = face_vector_dofs(mesh, lay, int(f)).ravel()
            if gamma:
                tA.add(gd, gd, local_a_sigma(fe, gamma, n))
            pp = disc.pplates[p]
            tB1.add(lay.n_p + pp.global_dofs, gd, local_b1_sigma(fe, pp, disc.surface.frame, n))
    for pl, pp in zip(disc.plates, disc.pplates):
        ip = lay.n_p + pp.global_dofs
        iw = pl.global_dofs
        tC1.add(ip, ip, local_c1(pp, params))
        tC2.add(iw, iw, local_c2(pl, params))
        b2, b3 = local_b2_b3(pp, pl, params)
        top, bottom = local_b3_coupling(b2, b3)
        tB23.add(ip, iw, top)
        tB32.add(iw, ip, bottom)
    return {
        "A": tA.matrix((lay.n_u, lay.n_u)),
        "B1": tB1.matrix((nq, lay.n_u)),
        "C1": tC1.matrix((nq, nq)),
        "C2": tC2.matrix((lay.n_w, lay.n_w)),
        "B23": tB23.matrix((nq, lay.n_w)),
        "B32": tB32.matrix((lay.n_w, nq)),
    }


def assemble_rhs(disc: Discretization, params: ModelParams, data: LoadData) -> np.ndarray:
    lay = disc.layout
    mesh = disc.mesh
    off = lay.offsets
    b = np.zeros(lay.size)
    if data.f is not None:
        for el in disc.cells:
            b[el.global_dofs] += local_rhs_F(el, data.f)
    if data.traction is not None:
        for f in mesh.faces_with_tag(GAMMA_SIGMA):
            fe = disc.face_elems[int(f)]
            b[face_vector_dofs(mesh, lay, int(f)).ravel()] += _boundary_face_load(fe, data.traction, mesh.face_normals[f])
    if data.sigma_traction is not None:
        for f in disc.connector.polygon_to_face:
            fe = disc.face_elems[int(f)]
            b[face_vector_dofs(mesh, lay, int(f)).ravel()] += _boundary_face_load(fe, data.sigma_traction, disc.n_sigma)
    g = data.g or _zero
    m = data.m or _zero
    for pl, pp in zip(disc.plates, disc.pplates):
        G, M = local_rhs_G_M(pp, pl, g, m, params)
        if data.sigma_flux is not None:
            q = pp.quad
            G += pp.pi.T @ q.integrate(data.sigma_flux(q.points)[:, None] * pp.basis.values(q.points))
        b[off["phi"] + pp.global_dofs] += G
        b[off["w"] + pl.global_dofs] += M
    return b


def prescribed_values(disc: Discretization, data: LoadData) -> np.ndarray:
    lay = disc.layout
    x = np.zeros(lay.size)
    if data.u_bc is not None:
        x[: lay.n_u] = interpolate_u(disc, data.u_bc, data.div_u)
    if data.phi_bc is not None:
        x[lay.block("phi")] = interpolate_phi(disc, data.phi_bc)
    if data.w_bc is not None:
        grad = data.w_grad_bc or (lambda xi: np.zeros((len(xi), 2)))
        x[lay.block("w")] = interpolate_w(disc, data.w_bc, grad)
    out = np.zeros(lay.size)
    out[lay.constrained] = x[lay.constrained]
    return out


def assemble(disc: Discretization, params: ModelParams, data: LoadData | None = None) -> BlockSystem:
    """Full block operator with the Dirichlet data stored for symmetric elimination."""
    data = data or LoadData()
    lay = disc.layout
    bl = assemble_blocks(disc, params)
    A, B1, C1, C2, B23, B32 = (bl[k] for k in ("A", "B1", "C1", "C2", "B23", "B32"))
    K = sp.bmat(
        [[A, B1.T, None], [B1, -C1, B23], [None, B32, C2]],
        format="csr",
    )
    if K.shape != (lay.size, lay.size):
        raise AssemblyError(f"assembled shape {K.shape} does not match layout size {lay.size}")
    K.sort_indices()
    b = assemble_rhs(disc, params, data)
    x0 = prescribed_values(disc, data)
    return BlockSystem(K, b, lay, x0, bl)


# ---------------------------------------------------------------- inf-sup


def inf_sup_constant(disc: Discretization, part: str = "both") -> float:
    """Smallest generalized singular value of B1 on free DOFs.

    Metric on u: a_h with unit density, viscosity and time step and no slip
    term.  Metric on (p, φ): the P_1 mass on p plus c_1h with unit c_0/τ and κ.
    ``part`` restricts the multiplier space to ``"p"`` or ``"phi"``.
    """
    if part not in ("both", "p", "phi"):
        raise ConfigurationError(f"unknown inf-sup part {part!r}")
    lay = disc.layout
    unit = ModelParams()
    bl = assemble_blocks(disc, unit, gamma_override=0.0)
    X = bl["A"]
    B1 = bl["B1"]
    tP = _Triplets()
    for el, pel in zip(disc.cells, disc.pcells):
        idx = pel.dofs - lay.offsets["p"]
        tP.add(idx, idx, el.mass1)
    nq = lay.n_p + lay.n_phi
    Mp = tP.matrix((lay.n_p, lay.n_p))
    C1 = bl["C1"][lay.n_p:, lay.n_p:]
    Q = sp.block_diag([Mp, C1], format="csr")
    free = lay.free
    fu = free[free < lay.n_u]
    lo = lay.n_u + (lay.n_p if part == "phi" else 0)
    hi = lay.n_u + (lay.n_p if part == "p" else nq)
    fq = free[(free >= lo) & (free < hi)] - lay.n_u
    Xf = X[fu][:, fu].tocsc()
    Bf = B1[fq][:, fu]
    Qf = Q[fq][:, fq].toarray()
    lu = spla.splu(Xf)
    Y = lu.solve(Bf.T.toarray())
    S = Bf @ Y
    S = 0.5 * (S + S.T)
    ev = sla.eigh(S, Qf, eigvals_only=True)
    return float(np.sqrt(max(ev.min(), 0.0)))
