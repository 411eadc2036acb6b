"""Small hand-built meshes shared by the tests."""

import numpy as np

from biotvem.mesh import GAMMA_SIGMA, GAMMA_U, SIGMA, PolyMesh3, tag_boundaries


def prism_mesh(base_xy, z0=0.0, z1=1.0):
    """Single prism over a counter-clockwise polygon ``base_xy``."""
    b = np.asarray(base_xy, float)
    n = len(b)
    verts = np.vstack([np.column_stack([b, np.full(n, z0)]), np.column_stack([b, np.full(n, z1)])])
    bottom = list(range(n))[::-1]
    top = list(range(n, 2 * n))
    sides = [[i, (i + 1) % n, n + (i + 1) % n, n + i] for i in range(n)]
    faces = [bottom, top] + sides
    return PolyMesh3(verts, faces, [list(range(len(faces)))])


def tetra_mesh():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.2, 0.9, 0.0], [0.3, 0.3, 0.8]])
    faces = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]]
    return PolyMesh3(verts, faces, [[0, 1, 2, 3]])


def octa_mesh():
    verts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float) * 0.5
    faces = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return PolyMesh3(verts, faces, [list(range(8))])


PENTAGON = np.array([[0.0, 0.0], [1.0, 0.0], [1.3, 0.6], [0.5, 1.1], [-0.2, 0.7]])


def prism_with_sigma(base_xy=PENTAGON):
    """Prism with the top face at x3 = 1 tagged Sigma and the rest GammaU."""
    mesh = prism_mesh(base_xy, 0.0, 1.0)
    rule = {
        SIGMA: lambda x: np.abs(x[:, 2] - 1.0) < 1e-12,
        GAMMA_U: lambda x: x[:, 2] < 1.0 - 1e-12,
        GAMMA_SIGMA: lambda x: np.zeros(len(x), bool),
    }
    return tag_boundaries(mesh, rule)
