"""Polyhedral bulk mesh, the flat surface mesh of Σ and the connector between them.

Mesh text format (0-based indices, ``#`` starts a comment)::

    VERTICES n
    x y z            (n lines)
    FACES m
    i0 i1 i2 ...     (m lines, ordered vertex loop)
    CELLS c
    f0 f1 f2 ...     (c lines, face indices)
    TAGS t
    face_index tag   (t lines, tag in GammaU | GammaSigma | Sigma)

Face loops are re-oriented on construction so that each face normal points
out of the first listed owner cell.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .basis import polygon_area_vector, polygon_centroid, quad_polyhedron
from .exceptions import ConfigurationError, GeometryError, MeshParseError, TopologyError

log = logging.getLogger(__name__)

INTERIOR = "interior"
GAMMA_U = "GammaU"
GAMMA_SIGMA = "GammaSigma"
SIGMA = "Sigma"
BOUNDARY_TAGS = (GAMMA_U, GAMMA_SIGMA, SIGMA)


def _frozen(a):
    a = np.asarray(a)
    a.flags.writeable = False
    return a


def _diameter(xs):
    d = xs[:, None, :] - xs[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


class PolyMesh3:
    """Immutable polyhedral mesh with cached geometry.

    Attributes
    ----------
    vertices : (nv, 3) array
    faces : list of int arrays, vertex loops (outward for ``face_cells[f, 0]``)
    cells : list of int arrays, face indices of each cell
    cell_face_signs : list of int arrays, +1 where the face normal is outward
    face_cells : (nf, 2) int array, second entry -1 on the boundary
    edges : (ne, 2) int array of sorted vertex pairs
    face_edges : list of int arrays aligned with ``faces`` (edge j joins loop[j], loop[j+1])
    tags : (nf,) object array of tag names
    """

    def __init__(self, vertices, faces, cells, tags=None, *, check=True):
        self.vertices = _frozen(np.asarray(vertices, dtype=float).reshape(-1, 3))
        nv = len(self.vertices)
        faces = [np.asarray(f, dtype=int) for f in faces]
        cells = [np.asarray(c, dtype=int) for c in cells]
        for i, f in enumerate(faces):
            if len(f) < 3 or f.min() < 0 or f.max() >= nv:
                raise TopologyError(f"face {i} has an invalid vertex list")
            if len(set(f.tolist())) != len(f):
                raise TopologyError(f"face {i} repeats a vertex")
        nf = len(faces)
        owners = [[] for _ in range(nf)]
        for k, c in enumerate(cells):
            if len(c) < 4 or c.min() < 0 or c.max() >= nf:
                raise TopologyError(f"cell {k} has an invalid face list")
            for f in c:
                owners[f].append(k)
        for i, o in enumerate(owners):
            if len(o) == 0 or len(o) > 2:
                raise TopologyError(f"face {i} is shared by {len(o)} cells")

        xs = self.vertices
        centroid_guess = [xs[np.unique(np.concatenate([faces[f] for f in c]))].mean(axis=0) for c in cells]

        # orient every loop outward for its first owner
        face_cells = np.full((nf, 2), -1, dtype=int)
        for i, o in enumerate(owners):
            first = o[0]
            av = polygon_area_vector(xs[faces[i]])
            if np.dot(xs[faces[i]].mean(axis=0) - centroid_guess[first], av) < 0:
                faces[i] = faces[i][::-1].copy()
            face_cells[i, : len(o)] = o
        self.faces = [_frozen(f) for f in faces]
        self.cells = [_frozen(c) for c in cells]
        self.face_cells = _frozen(face_cells)
        self.cell_face_signs = [
            _frozen(np.array([1 if face_cells[f, 0] == k else -1 for f in c], dtype=int))
            for k, c in enumerate(cells)
        ]

        # edges
        edge_index = {}
        face_edges = []
        for f in self.faces:
            fe = []
            for a, b in zip(f, np.roll(f, -1)):
                key = (min(a, b), max(a, b))
                if key not in edge_index:
                    edge_index[key] = len(edge_index)
                fe.append(edge_index[key])
            face_edges.append(_frozen(np.array(fe, dtype=int)))
        self.edge_index = edge_index
        self.edges = _frozen(np.array(sorted(edge_index, key=edge_index.get), dtype=int).reshape(-1, 2))
        self.face_edges = face_edges
        self.cell_vertices = [
            _frozen(np.unique(np.concatenate([self.faces[f] for f in c]))) for c in self.cells
        ]
        self.cell_edges = [
            _frozen(np.unique(np.concatenate([self.face_edges[f] for f in c]))) for c in self.cells
        ]

        self._compute_geometry()
        if tags is None:
            tags = np.array([INTERIOR] * nf, dtype=object)
            tags[face_cells[:, 1] < 0] = ""
        self.tags = _frozen(np.asarray(tags, dtype=object))
        if check:
            self.validate()

    # ------------------------------------------------------------ geometry
    def _compute_geometry(self):
        xs = self.vertices
        nf = len(self.faces)
        self.face_area_vectors = _frozen(np.array([polygon_area_vector(xs[f]) for f in self.faces]))
        self.face_areas = _frozen(np.linalg.norm(self.face_area_vectors, axis=1))
        if np.any(self.face_areas <= 0):
            bad = np.nonzero(self.face_areas <= 0)[0]
            raise GeometryError(f"faces with zero area: {bad.tolist()}")
        self.face_normals = _frozen(self.face_area_vectors / self.face_areas[:, None])
        self.face_centroids = _frozen(np.array([polygon_centroid(xs[f]) for f in self.faces]))
        self.face_diameters = _frozen(np.array([_diameter(xs[f]) for f in self.faces]))
        vols, cents, diams = [], [], []
        for k, c in enumerate(self.cells):
            loops = self.cell_face_loops(k)
            q = quad_polyhedron(loops, 1, check_closed=False)
            v = q.measure
            vols.append(v)
            cents.append(q.integrate(q.points) / v)
            diams.append(_diameter(xs[self.cell_vertices[k]]))
        self.cell_volumes = _frozen(np.array(vols))
        self.cell_centroids = _frozen(np.array(cents).reshape(-1, 3))
        self.cell_diameters = _frozen(np.array(diams))
        self.edge_lengths = _frozen(np.linalg.norm(xs[self.edges[:, 1]] - xs[self.edges[:, 0]], axis=1))

    def cell_face_loops(self, k):
        """Outward-oriented vertex coordinate loops of cell ``k``."""
        out = []
        for f, s in zip(self.cells[k], self.cell_face_signs[k]):
            loop = self.vertices[self.faces[f]]
            out.append(loop if s > 0 else loop[::-1])
        return out

    def divergence_volume(self, k):
        """Cell volume from the divergence theorem over its faces."""
        v = 0.0
        for f, s in zip(self.cells[k], self.cell_face_signs[k]):
            v += s * np.dot(self.face_centroids[f], self.face_area_vectors[f]) / 3.0
        return v

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def h(self):
        return float(self.cell_diameters.max())

    @property
    def boundary_faces(self):
        return np.nonzero(self.face_cells[:, 1] < 0)[0]

    def faces_with_tag(self, tag):
        return np.nonzero(self.tags == tag)[0]

    # ---------------------------------------------------------- validation
    def validate(self):
        xs = self.vertices
        for i, f in enumerate(self.faces):
            hf = self.face_diameters[i]
            dev = np.abs((xs[f] - self.face_centroids[i]) @ self.face_normals[i]).max()
            if dev > 1e-10 * hf:
                raise GeometryError(f"face {i} is not planar (deviation {dev:.3e})")
        for k in range(self.n_cells):
            total = np.zeros(3)
            for f, s in zip(self.cells[k], self.cell_face_signs[k]):
                total += s * self.face_area_vectors[f]
            hk = self.cell_diameters[k]
            if np.linalg.norm(total) > 1e-12 * hk**2:
                raise TopologyError(f"cell {k} is not closed (area-vector sum {np.linalg.norm(total):.3e})")
            if self.cell_volumes[k] <= 0:
                raise GeometryError(f"cell {k} has non-positive volume")

    def with_tags(self, tags) -> "PolyMesh3":
        new = object.__new__(PolyMesh3)
        new.__dict__.update(self.__dict__)
        new.tags = _frozen(np.asarray(tags, dtype=object))
        return new


# ------------------------------------------------------------ generation


def generate_cube_mesh(n: int, box=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))) -> PolyMesh3:
    """Structured mesh of ``n**3`` hexahedra on an axis-aligned box."""
    if int(n) != n or n < 1:
        raise ConfigurationError("n must be a positive integer")
    lo = np.asarray(box[0], float)
    hi = np.asarray(box[1], float)
    if np.any(hi <= lo):
        raise ConfigurationError("degenerate box")
    m = n + 1
    g = [np.linspace(lo[d], hi[d], m) for d in range(3)]
    X, Y, Z = np.meshgrid(*g, indexing="ij")
    verts = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    def vid(i, j, k):
        return i + m * (j + m * k)

    faces = []
    fid = {}
    # x-normal faces at i, spanning (j..j+1, k..k+1), loop with +x normal
    for k in range(n):
        for j in range(n):
            for i in range(m):
                fid[("x", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)])
    for k in range(n):
        for j in range(m):
            for i in range(n):
                fid[("y", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)])
    for k in range(m):
        for j in range(n):
            for i in range(n):
                fid[("z", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)])
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cells.append([
                    fid[("x", i, j, k)], fid[("x", i + 1, j, k)],
                    fid[("y", i, j, k)], fid[("y", i, j + 1, k)],
                    fid[("z", i, j, k)], fid[("z", i, j, k + 1)],
                ])
    return PolyMesh3(verts, faces, cells)


# --------------------------------------------------------------- file I/O


def _read_sections(text):
    lines = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append((no, s))
    return lines


def import_mesh(stream) -> PolyMesh3:
    """Parse the sectioned text format from a file object, path-like or string."""
    if hasattr(stream, "read"):
        text = stream.read()
    else:
        text = str(stream)
    lines = _read_sections(text)
    pos = 0
    verts = faces = cells = None
    tags = {}

    def header(expected):
        nonlocal pos
        if pos >= len(lines):
            raise MeshParseError(f"missing section {expected}", None)
        no, s = lines[pos]
        parts = s.split()
        if parts[0] != expected:
            raise MeshParseError(f"expected section {expected}, got {parts[0]!r}", no)
        if len(parts) != 2:
            raise MeshParseError(f"section {expected} needs a count", no)
        try:
            cnt = int(parts[1])
        except ValueError:
            raise MeshParseError(f"bad count {parts[1]!r}", no) from None
        if cnt < 0:
            raise MeshParseError("negative count", no)
        pos += 1
        return cnt, no

    def body(cnt, conv, what):
        nonlocal pos
        out = []
        for _ in range(cnt):
            if pos >= len(lines):
                raise MeshParseError(f"unexpected end of file in {what}", lines[-1][0] if lines else None)
            no, s = lines[pos]
            try:
                out.append(conv(s.split()))
            except (ValueError, IndexError):
                raise MeshParseError(f"malformed {what} entry {s!r}", no) from None
            pos += 1
        return out

    nv, _ = header("VERTICES")
    verts = body(nv, lambda p: [float(p[0]), float(p[1]), float(p[2])] if len(p) == 3 else int("x"), "VERTICES")
    nfc, _ = header("FACES")
    faces = body(nfc, lambda p: [int(v) for v in p], "FACES")
    ncl, _ = header("CELLS")
    cells = body(ncl, lambda p: [int(v) for v in p], "CELLS")
    tag_arr = None
    if pos < len(lines):
        nt, _ = header("TAGS")
        entries = body(nt, lambda p: (int(p[0]), p[1]) if len(p) == 2 else int("x"), "TAGS")
        for i, t in entries:
            if t not in BOUNDARY_TAGS:
                raise MeshParseError(f"unknown tag {t!r}", None)
            tags[i] = t
    if pos < len(lines):
        raise MeshParseError("trailing content", lines[pos][0])
    mesh = PolyMesh3(verts, faces, cells)
    if tags:
        tag_arr = np.array(mesh.tags, dtype=object)
        for i, t in tags.items():
            if i < 0 or i >= mesh.n_faces or mesh.face_cells[i, 1] >= 0:
                raise TopologyError(f"tag on non-boundary face {i}")
            tag_arr[i] = t
        mesh = mesh.with_tags(tag_arr)
    return mesh


def export_mesh(mesh: PolyMesh3, stream=None) -> str:
    """Write the mesh in the text format; returns the text as well."""
    buf = io.StringIO()
    buf.write(f"VERTICES {mesh.n_vertices}\n")
    for x in mesh.vertices:
        buf.write(" ".join(repr(float(c)) for c in x) + "\n")
    buf.write(f"FACES {mesh.n_faces}\n")
    for f in mesh.faces:
        buf.write(" ".join(str(int(v)) for v in f) + "\n")
    buf.write(f"CELLS {mesh.n_cells}\n")
    for c in mesh.cells:
        buf.write(" ".join(str(int(v)) for v in c) + "\n")
    tagged = [i for i in range(mesh.n_faces) if mesh.tags[i] in BOUNDARY_TAGS]
    buf.write(f"TAGS {len(tagged)}\n")
    for i in tagged:
        buf.write(f"{i} {mesh.tags[i]}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# -------------------------------------------------------------- tagging


TagRule = Mapping[str, Callable[[np.ndarray], np.ndarray]]


def example1_rule(tol: float = 1e-12) -> dict:
    """Γ^u: x3 <= 1/2, Γ^σ: 1/2 < x3 < 1, Σ: x3 = 1 (on face barycenters)."""
    return {
        GAMMA_U: lambda x: x[:, 2] <= 0.5 + tol,
        GAMMA_SIGMA: lambda x: (x[:, 2] > 0.5 + tol) & (x[:, 2] < 1.0 - tol),
        SIGMA: lambda x: np.abs(x[:, 2] - 1.0) <= tol,
    }


def tag_boundaries(mesh: PolyMesh3, rule: TagRule) -> PolyMesh3:
    bfaces = mesh.boundary_faces
    x = mesh.face_centroids[bfaces]
    hits = np.zeros((len(bfaces), len(rule)), dtype=bool)
    names = list(rule)
    for j, name in enumerate(names):
        if name not in BOUNDARY_TAGS:
            raise ConfigurationError(f"unknown boundary tag {name!r}")
        hits[:, j] = np.asarray(rule[name](x), dtype=bool)
    count = hits.sum(axis=1)
    if np.any(count != 1):
        none = bfaces[count == 0].tolist()
        many = bfaces[count > 1].tolist()
        raise ConfigurationError(f"boundary tagging is not a partition: untagged faces {none}, multiply tagged faces {many}")
    tags = np.array(mesh.tags, dtype=object)
    tags[bfaces] = [names[j] for j in hits.argmax(axis=1)]
    return mesh.with_tags(tags)


# --------------------------------------------------------- surface mesh


@dataclass(frozen=True)
class PlaneFrame:
    origin: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    normal: np.ndarray

    def to_local(self, x):
        d = np.atleast_2d(x) - self.origin
        return np.column_stack([d @ self.t1, d @ self.t2])

    def to_global(self, xi):
        xi = np.atleast_2d(xi)
        return self.origin + xi[:, :1] * self.t1 + xi[:, 1:2] * self.t2

    @property
    def tangent_matrix(self):
        """(3, 2) matrix with the tangent axes as columns."""
        return np.column_stack([self.t1, self.t2])


@dataclass
class SurfaceMesh2:
    """Polygonal mesh of the flat surface Σ in its tangent frame."""

    vertices: np.ndarray
    polygons: list
    frame: PlaneFrame
    edges: np.ndarray
    polygon_edges: list
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    areas: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)
    diameters: np.ndarray = field(init=False)
    vertex_h: np.ndarray = field(init=False)

    def __post_init__(self):
        xs = self.vertices
        self.areas = np.array([polygon_area_vector(np.column_stack([xs[p], np.zeros(len(p))]))[2] for p in self.polygons])
        if np.any(self.areas <= 0):
            raise GeometryError("surface polygons must be counterclockwise in the plane frame")
        self.centroids = np.array([polygon_centroid(xs[p]) for p in self.polygons])
        self.diameters = np.array([_diameter(xs[p]) for p in self.polygons])
        lengths = np.linalg.norm(xs[self.edges[:, 1]] - xs[self.edges[:, 0]], axis=1)
        acc = np.zeros(len(xs))
        cnt = np.zeros(len(xs))
        np.add.at(acc, self.edges.ravel(), np.repeat(lengths, 2))
        np.add.at(cnt, self.edges.ravel(), 1)
        # characteristic length h_z: mean length of edges incident to z
        self.vertex_h = acc / cnt
        self.edge_lengths = lengths

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_polygons(self):
        return len(self.polygons)

    @property
    def h(self):
        return float(self.edge_lengths.max())


@dataclass(frozen=True)
class BulkSurfaceConnector:
    face_to_polygon: dict
    polygon_to_face: np.ndarray
    vertex_to_bulk: np.ndarray
    bulk_to_vertex: dict
    edge_to_bulk: np.ndarray
    bulk_to_edge: dict


def _plane_frame(normal, point):
    n = normal / np.linalg.norm(normal)
    axis = np.eye(3)[np.argmin(np.abs(n))]
    t1 = axis - np.dot(axis, n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    origin = np.dot(point, n) * n
    return PlaneFrame(origin, t1, t2, n)


def extract_surface(mesh: PolyMesh3, tol: float = 1e-12):
    """Build the Σ mesh and the bulk↔surface connector from Σ-tagged faces."""
    sig = mesh.faces_with_tag(SIGMA)
    if len(sig) == 0:
        raise ConfigurationError("no faces tagged Sigma")
    normals = mesh.face_normals[sig]
    n_mean = normals.mean(axis=0)
    n_mean /= np.linalg.norm(n_mean)
    p0 = mesh.face_centroids[sig[0]]
    dev = 0.0
    for f in sig:
        dev = max(dev, float(np.abs((mesh.vertices[mesh.faces[f]] - p0) @ n_mean).max()))
        hf = mesh.face_diameters[f]
        if dev > 1e-10 * hf or np.linalg.norm(mesh.face_normals[f] - n_mean) > 1e-10:
            raise GeometryError(f"Sigma faces are not coplanar (max deviation {dev:.3e})")
    frame = _plane_frame(n_mean, p0)

    # hash vertices by quantised coordinates
    scale = max(float(np.ptp(mesh.vertices, axis=0).max()), 1.0)
    quantum = tol * scale

    def key(x):
        return tuple(np.round(x / quantum).astype(np.int64).tolist())

    vkey = {}
    vertex_to_bulk = []
    bulk_to_vertex = {}
    polygons = []
    for f in sig:
        loop = []
        for v in mesh.faces[f]:
            kk = key(mesh.vertices[v])
            if kk not in vkey:
                vkey[kk] = len(vertex_to_bulk)
                vertex_to_bulk.append(v)
            sv = vkey[kk]
            bulk_to_vertex[int(v)] = sv
            loop.append(sv)
        polygons.append(np.array(loop, dtype=int))
    vertex_to_bulk = np.array(vertex_to_bulk, dtype=int)
    xi = frame.to_local(mesh.vertices[vertex_to_bulk])
    # counterclockwise in the tangent frame
    for i, p in enumerate(polygons):
        a = polygon_area_vector(np.column_stack([xi[p], np.zeros(len(p))]))[2]
        if a < 0:
            polygons[i] = p[::-1].copy()
    edge_index = {}
    poly_edges = []
    for p in polygons:
        pe = []
        for a, b in zip(p, np.roll(p, -1)):
            kk = (min(a, b), max(a, b))
            if kk not in edge_index:
                edge_index[kk] = len(edge_index)
            pe.append(edge_index[kk])
        poly_edges.append(np.array(pe, dtype=int))
    edges = np.array(sorted(edge_index, key=edge_index.get), dtype=int).reshape(-1, 2)
    use = np.zeros(len(edges), dtype=int)
    for pe in poly_edges:
        use[pe] += 1
    boundary_edges = use == 1
    bverts = np.zeros(len(xi), dtype=bool)
    bverts[edges[boundary_edges].ravel()] = True
    surface = SurfaceMesh2(xi, polygons, frame, edges, poly_edges, boundary_edges, bverts)

    edge_to_bulk = np.array(
        [mesh.edge_index[tuple(sorted((int(vertex_to_bulk[a]), int(vertex_to_bulk[b]))))] for a, b in edges], dtype=int
    )
    bulk_to_edge = {int(e): i for i, e in enumerate(edge_to_bulk)}
    conn = BulkSurfaceConnector(
        face_to_polygon={int(f): i for i, f in enumerate(sig)},
        polygon_to_face=np.array(sig, dtype=int),
        vertex_to_bulk=vertex_to_bulk,
        bulk_to_vertex=bulk_to_vertex,
        edge_to_bulk=edge_to_bulk,
        bulk_to_edge=bulk_to_edge,
    )
    lifted = frame.to_global(xi)
    err = np.abs(lifted - mesh.vertices[vertex_to_bulk]).max()
    if err > 1e-12 * scale:
        raise GeometryError(f"connector coordinate mismatch {err:.3e}")
    return surface, conn


# ----------------------------------------------------------- regularity


@dataclass(frozen=True)
class RegularityReport:
    cell_star_radius: np.ndarray
    min_face_star_radius: float
    min_edge_ratio: float
    cell_edge_ratio: np.ndarray
    rho: float

    def warnings(self, threshold=0.05):
        out = []
        if self.min_edge_ratio < threshold:
            out.append(f"small edge: min h_e/h_K = {self.min_edge_ratio:.3g}")
        if self.cell_star_radius.min() < threshold:
            out.append(f"thin cell: min star radius / h_K = {self.cell_star_radius.min():.3g}")
        if self.min_face_star_radius < threshold:
            out.append(f"thin face: min star radius / h_K = {self.min_face_star_radius:.3g}")
        return out


def check_regularity(mesh: PolyMesh3) -> RegularityReport:
    """Estimate the mesh regularity ratios; warns, never rejects.

    The star-shape radius of a cell is estimated by the distance from its
    centroid to the nearest face plane (exact for convex cells), scaled by
    h_K; faces use the distance from the face centroid to the nearest edge
    line, scaled by the owning h_K.
    """
    xs = mesh.vertices
    cell_r = np.empty(mesh.n_cells)
    edge_ratio = np.empty(mesh.n_cells)
    face_min = np.inf
    for k, c in enumerate(mesh.cells):
        hk = mesh.cell_diameters[k]
        xc = mesh.cell_centroids[k]
        d = [abs(np.dot(xc - mesh.face_centroids[f], mesh.face_normals[f])) for f in c]
        cell_r[k] = min(d) / hk
        edge_ratio[k] = mesh.edge_lengths[mesh.cell_edges[k]].min() / hk
        for f in c:
            loop = xs[mesh.faces[f]]
            fc = mesh.face_centroids[f]
            dmin = np.inf
            for a, b in zip(loop, np.roll(loop, -1, axis=0)):
                t = (b - a) / np.linalg.norm(b - a)
                r = fc - a
                dmin = min(dmin, np.linalg.norm(r - np.dot(r, t) * t))
            face_min = min(face_min, dmin / hk)
    rep = RegularityReport(
        cell_star_radius=np.clip(cell_r, 0, 1),
        min_face_star_radius=float(min(face_min, 1.0)),
        min_edge_ratio=float(edge_ratio.min()),
        cell_edge_ratio=edge_ratio,
        rho=float(min(cell_r.min(), face_min, edge_ratio.min())),
    )
    for w in rep.warnings():
        log.warning(w)
    return rep
