"""Scaled monomial bases and sub-simplex quadrature.

Monomials are ``((x - x_D) / h_D) ** t`` with multi-indices ``t`` in graded
lexicographic order: by total degree, then by exponent tuple descending, so
that in 3D the linear block is ``x, y, z`` and the quadratic block starts
``x^2, xy, xz, y^2, ...``.  The ordering is global and fixed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import roots_jacobi

from .exceptions import GeometryError, TopologyError


@lru_cache(maxsize=None)
def exponents(dim: int, degree: int) -> np.ndarray:
    """Multi-indices of total degree <= ``degree`` in graded-lex order."""
    out = []
    for d in range(degree + 1):
        block = [t for t in itertools.product(range(d + 1), repeat=dim) if sum(t) == d]
        out.extend(sorted(block, reverse=True))
    arr = np.array(out, dtype=int).reshape(-1, dim)
    arr.flags.writeable = False
    return arr


def n_monomials(dim: int, degree: int) -> int:
    return comb(degree + dim, dim) if degree >= 0 else 0


@lru_cache(maxsize=None)
def _index_table(dim, degree):
    return {tuple(t): i for i, t in enumerate(exponents(dim, degree))}


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomials of one entity (segment, polygon or polyhedron)."""

    dim: int
    degree: int
    center: np.ndarray
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("scaling h_D must be positive")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        c = np.asarray(self.center, dtype=float).reshape(self.dim)
        object.__setattr__(self, "center", c)

    @property
    def exponents(self) -> np.ndarray:
        return exponents(self.dim, self.degree)

    def __len__(self):
        return n_monomials(self.dim, self.degree)

    def index(self, t) -> int:
        return _index_table(self.dim, self.degree)[tuple(t)]

    def _scaled(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.center) / self.h

    def _powers(self, s):
        # pw[j][i, e] = s[i, j] ** e, with zero powers for negative exponents
        p = self.degree
        pw = np.ones((self.dim, s.shape[0], p + 2))
        for e in range(1, p + 1):
            pw[:, :, e] = pw[:, :, e - 1] * s.T
        return pw

    def values(self, x) -> np.ndarray:
        """Values at points ``x`` with shape (N, dim); returns (N, n)."""
        s = self._scaled(x)
        pw = self._powers(s)
        t = self.exponents
        out = np.ones((s.shape[0], len(t)))
        for j in range(self.dim):
            out *= pw[j][:, t[:, j]]
        return out

    def gradients(self, x) -> np.ndarray:
        """Gradients at ``x``; returns (N, n, dim)."""
        s = self._scaled(x)
        pw = self._powers(s)
        t = self.exponents
        out = np.ones((s.shape[0], len(t), self.dim))
        for d in range(self.dim):
            for j in range(self.dim):
                if j == d:
                    e = np.maximum(t[:, j] - 1, 0)
                    out[:, :, d] *= pw[j][:, e] * (t[:, j] / self.h)
                else:
                    out[:, :, d] *= pw[j][:, t[:, j]]
        return out

    def hessians(self, x) -> np.ndarray:
        """Hessians at ``x``; returns (N, n, dim, dim)."""
        s = self._scaled(x)
        pw = self._powers(s)
        t = self.exponents
        out = np.ones((s.shape[0], len(t), self.dim, self.dim))
        for a in range(self.dim):
            for b in range(self.dim):
                order = np.zeros_like(t)
                order[:, a] += 1
                order[:, b] += 1
                factor = np.ones(len(t))
                for j in range(self.dim):
                    o = order[:, j]
                    # falling factorial t (t-1) ... for o derivatives
                    f = np.ones(len(t))
                    for q in range(o.max(initial=0)):
                        f *= np.where(o > q, t[:, j] - q, 1)
                    factor *= f
                    e = np.maximum(t[:, j] - o, 0)
                    out[:, :, a, b] *= pw[j][:, e]
                out[:, :, a, b] *= factor / self.h**2
        return out

    def derivative_matrix(self, j: int) -> np.ndarray:
        """``D`` with ``coeffs(d/dx_j p) = D @ coeffs(p)`` inside this basis."""
        t = self.exponents
        n = len(t)
        D = np.zeros((n, n))
        table = _index_table(self.dim, self.degree)
        for col, tt in enumerate(t):
            if tt[j] == 0:
                continue
            lower = list(tt)
            lower[j] -= 1
            D[table[tuple(lower)], col] = tt[j] / self.h
        return D


def monomials(center, h, dim, k) -> MonomialBasis:
    return MonomialBasis(dim=dim, degree=k, center=np.asarray(center, dtype=float), h=float(h))


@dataclass(frozen=True)
class ComplementBasis:
    """Basis of x ∧ P_{k-1} (3D) or x^⊥ P_{k-1} (2D), scaled by the entity.

    ``coeffs`` has shape (dim * n_k, m): column ``j`` is member ``j`` written
    over the component-major vector monomial basis of degree ``k``.
    """

    dim: int
    degree: int
    coeffs: np.ndarray

    def __len__(self):
        return self.coeffs.shape[1]


def complement_basis(basis: MonomialBasis, k: int | None = None) -> ComplementBasis:
    """Scaled complement of ``grad P_{k+1}`` inside vector ``P_k``.

    Candidates are generated in a fixed order and kept greedily while they
    raise the rank, which makes the selection deterministic.
    """
    if k is None:
        k = basis.degree
    dim = basis.dim
    nk = n_monomials(dim, k)
    if k < 1:
        return ComplementBasis(dim, k, np.zeros((dim * nk, 0)))
    low = exponents(dim, k - 1)
    table = _index_table(dim, k)

    def shift(t, j):
        tt = list(t)
        tt[j] += 1
        return table[tuple(tt)]

    cands = []
    if dim == 3:
        # x̂ ∧ (e_c m): x̂ ∧ e_c = (0, z, -y), (-z, 0, x), (y, -x, 0) for c = 0, 1, 2
        cross = {0: [(1, 2, +1), (2, 1, -1)], 1: [(0, 2, -1), (2, 0, +1)], 2: [(0, 1, +1), (1, 0, -1)]}
        for t in low:
            for c in range(3):
                v = np.zeros(3 * nk)
                for comp, var, sgn in cross[c]:
                    v[comp * nk + shift(t, var)] += sgn
                cands.append(v)
    elif dim == 2:
        for t in low:
            v = np.zeros(2 * nk)
            v[0 * nk + shift(t, 1)] = 1.0
            v[1 * nk + shift(t, 0)] = -1.0
            cands.append(v)
    else:
        raise ValueError("complement basis needs dim 2 or 3")
    target = dim * nk - n_monomials(dim, k + 1) + 1
    kept = []
    rank = 0
    for v in cands:
        trial = np.column_stack(kept + [v])
        r = np.linalg.matrix_rank(trial, tol=1e-10)
        if r > rank:
            kept.append(v)
            rank = r
        if rank == target:
            break
    return ComplementBasis(dim, k, np.column_stack(kept) if kept else np.zeros((dim * nk, 0)))


def gradient_coefficients(basis: MonomialBasis, k: int) -> np.ndarray:
    """Gradients of the non-constant members of M_{k+1} over vector M_k.

    Returns (dim * n_k, n_{k+1} - 1), component-major rows.
    """
    dim = basis.dim
    big = MonomialBasis(dim, k + 1, basis.center, basis.h)
    nk = n_monomials(dim, k)
    out = np.zeros((dim * nk, len(big) - 1))
    for c in range(dim):
        D = big.derivative_matrix(c)[:nk, 1:]
        out[c * nk:(c + 1) * nk] = D
    return out


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))

    @property
    def measure(self):
        return float(self.weights.sum())


def _jacobi01(n, alpha):
    x, w = roots_jacobi(n, alpha, 0.0)
    # weight (1 - x)^alpha on [-1, 1] -> (1 - s)^alpha on [0, 1]
    return (x + 1) / 2, w / 2 ** (alpha + 1)


@lru_cache(maxsize=None)
def segment_rule(degree: int):
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Collapsed Gauss-Jacobi rule on the unit right triangle."""
    n = max(1, (degree + 2) // 2)
    a, wa = _jacobi01(n, 1.0)
    b, wb = _jacobi01(n, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel()])
    wts = np.outer(wa, wb).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def tetra_rule(degree: int):
    """Collapsed Gauss-Jacobi rule on the unit right tetrahedron."""
    n = max(1, (degree + 2) // 2)
    a, wa = _jacobi01(n, 2.0)
    b, wb = _jacobi01(n, 1.0)
    c, wc = _jacobi01(n, 0.0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel(), (C * (1 - A) * (1 - B)).ravel()])
    wts = np.einsum("i,j,k->ijk", wa, wb, wc).ravel()
    return pts, wts


def quad_segment(a, b, exactness: int) -> QuadRule:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    s, w = segment_rule(exactness)
    pts = a + s[:, None] * (b - a)
    return QuadRule(pts, w * np.linalg.norm(b - a), exactness)


def polygon_area_vector(xs: np.ndarray) -> np.ndarray:
    """Vector area 1/2 sum x_i × x_{i+1} of a 3D loop."""
    return 0.5 * np.cross(xs, np.roll(xs, -1, axis=0)).sum(axis=0)


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def check_simple_polygon(xy: np.ndarray) -> None:
    n = len(xy)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % n], xy[j], xy[(j + 1) % n]):
                raise GeometryError(f"polygon is self-intersecting (edges {i} and {j})")


def _planar_coords(xs):
    if xs.shape[1] == 2:
        return xs
    av = polygon_area_vector(xs)
    nrm = av / np.linalg.norm(av)
    t1 = xs[1] - xs[0]
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(nrm, t1)
    d = xs - xs[0]
    return np.column_stack([d @ t1, d @ t2])


def polygon_centroid(xs: np.ndarray) -> np.ndarray:
    """Area centroid of a planar polygon given in 2D or 3D coordinates."""
    xs = np.asarray(xs, float)
    m = xs.mean(axis=0)
    a = xs - m
    b = np.roll(xs, -1, axis=0) - m
    if xs.shape[1] == 2:
        areas = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    else:
        av = polygon_area_vector(xs)
        nrm = av / np.linalg.norm(av)
        areas = 0.5 * np.cross(a, b) @ nrm
    cent = m + (a + b) / 3
    return (areas[:, None] * cent).sum(axis=0) / areas.sum()


def quad_polygon(xs, exactness: int, check: bool = True) -> QuadRule:
    """Fan triangulation from the area centroid with collapsed Gauss rules.

    ``xs`` is the ordered vertex loop, in 2D or 3D coordinates.  Signed
    triangle weights make the rule exact for any simple polygon, star-shaped
    or not; weights may be negative for non-star-shaped polygons.
    """
    xs = np.asarray(xs, float)
    if check:
        check_simple_polygon(_planar_coords(xs))
    c = polygon_centroid(xs)
    if xs.shape[1] == 3:
        av = polygon_area_vector(xs)
        nrm = av / np.linalg.norm(av)
    ref, rw = triangle_rule(exactness)
    pts, wts = [], []
    nxt = np.roll(xs, -1, axis=0)
    for a, b in zip(xs, nxt):
        e1, e2 = a - c, b - c
        if xs.shape[1] == 2:
            jac = e1[0] * e2[1] - e1[1] * e2[0]
        else:
            jac = np.dot(np.cross(e1, e2), nrm)
        pts.append(c + ref[:, :1] * e1 + ref[:, 1:] * e2)
        wts.append(rw * jac)
    w = np.concatenate(wts)
    if w.sum() < 0:
        w = -w
    return QuadRule(np.vstack(pts), w, exactness)


def quad_polyhedron(face_loops, exactness: int, apex=None, check_closed: bool = True) -> QuadRule:
    """Cone each fan-triangulated face to ``apex`` (default: vertex mean).

    ``face_loops`` is a list of (m_i, 3) vertex arrays, one per face, each
    oriented with its normal pointing out of the cell.  Signed tetrahedron
    weights keep the rule exact for cells that are not star-shaped with
    respect to the apex.
    """
    loops = [np.asarray(f, float) for f in face_loops]
    if check_closed:
        scale = np.ptp(np.vstack(loops), axis=0).max()
        gap = np.linalg.norm(sum(polygon_area_vector(f) for f in loops))
        if gap > 1e-12 * scale**2:
            raise TopologyError(f"polyhedron is not closed (area-vector sum {gap:.3e})")
    if apex is None:
        apex = np.unique(np.vstack(loops), axis=0).mean(axis=0)
    ref, rw = tetra_rule(exactness)
    pts, wts = [], []
    for loop in loops:
        fc = polygon_centroid(loop)
        for a, b in zip(loop, np.roll(loop, -1, axis=0)):
            e1, e2, e3 = fc - apex, a - apex, b - apex
            jac = np.linalg.det(np.column_stack([e1, e2, e3]))
            if jac == 0.0:
                continue
            pts.append(apex + ref[:, :1] * e1 + ref[:, 1:2] * e2 + ref[:, 2:] * e3)
            wts.append(rw * jac)
    w = np.concatenate(wts)
    if w.sum() < 0:
        w = -w
    return QuadRule(np.vstack(pts), w, exactness)
