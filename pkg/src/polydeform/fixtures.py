"""Synthetic meshes and labelings used by the test corpus and the README examples."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .labeling import AxisLabel, FaceLabeling, nearest_axis_label
from .mesh import SurfaceMesh, face_normals
from .rotation import axis_angle_matrix

PX, NX, PY, NY, PZ, NZ = (int(a) for a in AxisLabel)


def _grid_faces(rows, cols, index, flip=False):
    """Two triangles per cell of a ``rows x cols`` lattice, ``index(i, j)`` -> vertex id."""
    faces = []
    for i in range(rows):
        for j in range(cols):
            a, b, c, d = index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)
            tris = [(a, b, c), (a, c, d)]
            if flip:
                tris = [(t[0], t[2], t[1]) for t in tris]
            faces.extend(tris)
    return faces


def _orient_outward(vertices, faces):
    n = face_normals(vertices, faces)
    c = vertices[faces].mean(axis=1) - vertices.mean(axis=0)
    bad = np.einsum("ij,ij->i", n, c) < 0
    faces = faces.copy()
    faces[bad] = faces[bad][:, [0, 2, 1]]
    return faces


def cube(n=1, size=1.0):
    """Axis-aligned cube ``[0, size]^3`` with an ``n x n`` grid per side, outward winding."""
    keys = {}
    verts = []
    faces = []

    def vid(p):
        if p not in keys:
            keys[p] = len(verts)
            verts.append(p)
        return keys[p]

    for axis in range(3):
        u_ax, v_ax = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, n):
            def index(i, j, axis=axis, side=side, u_ax=u_ax, v_ax=v_ax):
                p = [0, 0, 0]
                p[axis], p[u_ax], p[v_ax] = side, i, j
                return vid(tuple(p))

            # u x v = +axis, so the n == side (far) face keeps the winding
            faces.extend(_grid_faces(n, n, index, flip=(side == 0)))
    V = np.array(verts, dtype=np.float64) * (size / n)
    return SurfaceMesh(V, np.array(faces))


def transformed(mesh, rotation=None, translation=None, scale=1.0):
    x = np.array(mesh.vertices) * scale
    if rotation is not None:
        x = x @ np.asarray(rotation).T
    if translation is not None:
        x = x + np.asarray(translation)
    return mesh.with_vertices(x)


def rotated_cube(angle=np.pi / 4, n=1):
    """Unit cube rotated about Z, with the labeling of the unrotated cube."""
    base = cube(n)
    labels = nearest_axis_label(base)
    return transformed(base, axis_angle_matrix([0, 0, 1], angle)), labels


def sphere(level=4):
    """Unit sphere from a subdivided octahedron; ``level=4`` gives 2048 faces."""
    verts = [np.array(v, dtype=np.float64) for v in ([1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1])]
    faces = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new
    V = np.array(verts)
    return SurfaceMesh(V, _orient_outward(V, np.array(faces)))


def _torus_grid(n_ring, n_tube):
    u = 2 * np.pi * np.arange(n_ring) / n_ring
    v = 2 * np.pi * np.arange(n_tube) / n_tube
    return u, v


def torus(n_ring=64, n_tube=32, major=1.0, minor=0.4):
    """Torus around the Y axis (ring in the XZ plane), ``2 * n_ring * n_tube`` faces.

    Cell ``(i, j)`` owns faces ``2*(i*n_tube + j)`` and ``2*(i*n_tube + j) + 1``.
    """
    u, v = _torus_grid(n_ring, n_tube)
    U, W = np.meshgrid(u, v, indexing="ij")
    radial = np.stack([np.cos(U), np.zeros_like(U), np.sin(U)], axis=-1)
    pos = (major + minor * np.cos(W))[..., None] * radial
    pos[..., 1] += minor * np.sin(W)
    V = pos.reshape(-1, 3)
    faces = np.array(_grid_faces(n_ring, n_tube, lambda i, j: (i % n_ring) * n_tube + (j % n_tube)))
    # orient away from the tube centre line
    n = face_normals(V, faces)
    cen = V[faces].mean(axis=1)
    ring = cen.copy()
    ring[:, 1] = 0
    ring *= major / np.linalg.norm(ring, axis=1, keepdims=True)
    bad = np.einsum("ij,ij->i", n, cen - ring) < 0
    faces[bad] = faces[bad][:, [0, 2, 1]]
    return SurfaceMesh(V, faces)


def torus_frame_labels(n_ring=64, n_tube=32):
    """Ten-chart picture-frame labeling, cut along grid lines.

    The ring splits into four quadrants (``+X, +Z, -X, -Z`` outward) and the
    tube into top, bottom, outer and inner quarters. The top and bottom
    quarters become single ``+Y`` / ``-Y`` annuli, the outer and inner ones
    take the quadrant's outward / inward axis.
    """
    u = 2 * np.pi * (np.arange(n_ring) + 0.5) / n_ring
    v = 2 * np.pi * (np.arange(n_tube) + 0.5) / n_tube
    U, W = np.meshgrid(u, v, indexing="ij")
    q = ((U + np.pi / 4) // (np.pi / 2)).astype(int) % 4
    outward = np.array([PX, PZ, NX, NZ])[q]
    inward = np.array([NX, NZ, PX, PZ])[q]
    s, c = np.sin(W), np.cos(W)
    lab = np.where(np.abs(s) > np.abs(c), np.where(s > 0, PY, NY), np.where(c > 0, outward, inward))
    return FaceLabeling(np.repeat(lab.reshape(-1), 2))


def torus_four_band_labels(n_ring=64, n_tube=32):
    """Four bands around the tube, labeled ``+X, +Z, -X, -Z`` by tube angle."""
    v = 2 * np.pi * (np.arange(n_tube) + 0.5) / n_tube
    band = ((v + np.pi / 4) // (np.pi / 2)).astype(int) % 4
    per_cell = np.tile(np.array([PX, PZ, NX, NZ])[band], n_ring)
    return FaceLabeling(np.repeat(per_cell, 2))


def open_cylinder(n_around=48, n_height=16, radius=1.0, height=2.0):
    """Open tube along Z (two boundary loops), angles offset half a step."""
    t = 2 * np.pi * (np.arange(n_around) + 0.5) / n_around
    z = np.linspace(-height / 2, height / 2, n_height + 1)
    T, Z = np.meshgrid(t, z, indexing="ij")
    V = np.stack([radius * np.cos(T), radius * np.sin(T), Z], axis=-1).reshape(-1, 3)
    faces = np.array(_grid_faces(n_around, n_height, lambda i, j: (i % n_around) * (n_height + 1) + j))
    n = face_normals(V, faces)
    cen = V[faces].mean(axis=1)
    cen[:, 2] = 0
    bad = np.einsum("ij,ij->i", n, cen) < 0
    faces[bad] = faces[bad][:, [0, 2, 1]]
    return SurfaceMesh(V, faces)


# Closed strip of eight unit squares whose frame comes back with its width
# axis reversed: (centre, travel direction, width direction), doubled coords.
_MOBIUS_SQUARES = (
    ((1, 0, 1), (1, 0, 0), (0, 0, 1)),
    ((3, 0, 1), (1, 0, 0), (0, 0, 1)),
    ((4, -1, 1), (0, -1, 0), (0, 0, 1)),
    ((4, -3, 1), (0, -1, 0), (0, 0, 1)),
    ((3, -3, 2), (-1, 0, 0), (0, 1, 0)),
    ((1, -3, 2), (-1, 0, 0), (0, 1, 0)),
    ((1, -2, 1), (0, 0, -1), (1, 0, 0)),
    ((0, -1, 1), (0, 1, 0), (0, 0, -1)),
)


def polycube_mobius(k=6, smooth=10, tilt=0.15):
    """Non-orientable polycube strip, smoothed and tilted, with its polycube labels.

    Each unit square is an ``k x k`` grid. Taubin smoothing rounds off the
    folds and a small rotation moves every face off its axis, so the
    deformation has real work to do. Labels are the positive axis of each
    square's normal; signs are left to the per-face sign resolution.
    Returns ``(mesh, labels)``.
    """
    keys = {}
    verts = []
    faces = []
    labels = []

    def vid(p):
        key = tuple(np.round(p * k).astype(int))
        if key not in keys:
            keys[key] = len(verts)
            verts.append(p)
        return keys[key]

    g = np.linspace(-1.0, 1.0, k + 1)
    for c, d, w in _MOBIUS_SQUARES:
        c, d, w = (np.array(x, dtype=np.float64) for x in (c, d, w))
        idx = [[vid(c + a * d + b * w) for b in g] for a in g]
        faces.extend(_grid_faces(k, k, lambda i, j: idx[i][j]))
        labels += [2 * int(np.argmax(np.abs(np.cross(d, w))))] * (2 * k * k)
    V = np.array(verts) / 2.0
    mesh = SurfaceMesh(V, np.array(faces))

    e = mesh.edges
    n = len(V)
    adj = sparse.coo_matrix(
        (np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)
    ).tocsr()
    deg = np.asarray(adj.sum(axis=1)).reshape(-1, 1)
    for _ in range(smooth):
        V = V + 0.5 * (adj @ V / deg - V)
        V = V - 0.53 * (adj @ V / deg - V)
    V = V @ axis_angle_matrix([1, 2, 3], tilt).T
    return mesh.with_vertices(V), FaceLabeling(np.array(labels))


def checkerboard_patch(n=8, tilt=np.pi / 4):
    """Open square patch whose four quadrants alternate ``+X`` / ``+Z`` around the centre vertex.

    The patch is tilted about Y so every normal has positive X and Z parts.
    Only the corner-valence condition is violated.
    """
    g = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    V = np.stack([X, Y, np.zeros_like(X)], axis=-1).reshape(-1, 3)
    faces = np.array(_grid_faces(n, n, lambda i, j: i * (n + 1) + j))
    R = axis_angle_matrix([0, 1, 0], tilt)
    mesh = SurfaceMesh(V @ R.T, faces)
    cen = V[faces].mean(axis=1)
    quad = (cen[:, 0] > 0).astype(int) ^ (cen[:, 1] > 0).astype(int)
    return mesh, FaceLabeling(np.where(quad == 0, PX, PZ))


def cube_with_island(n=4):
    """Refined cube whose top-centre 2x2 cells are labeled +X: one chart with a single neighbour."""
    mesh = cube(n)
    lab = np.array(nearest_axis_label(mesh).labels)
    cen = mesh.vertices[mesh.faces].mean(axis=1)
    top = (lab == PZ) & (np.abs(cen[:, 0] - 0.5) < 1.0 / n) & (np.abs(cen[:, 1] - 0.5) < 1.0 / n)
    lab[top] = PX
    return mesh, FaceLabeling(lab)


def cube_split_top(n=2):
    """Refined cube whose top side is half +Z, half -Z: opposite labels become neighbours."""
    mesh = cube(n)
    lab = np.array(nearest_axis_label(mesh).labels)
    cen = mesh.vertices[mesh.faces].mean(axis=1)
    lab[(lab == PZ) & (cen[:, 0] > 0.5)] = NZ
    return mesh, FaceLabeling(lab)


def half_and_half(mesh):
    """``+X`` for faces with centroid x >= 0, ``-X`` otherwise."""
    cen = mesh.vertices[mesh.faces].mean(axis=1)
    return FaceLabeling(np.where(cen[:, 0] >= 0, PX, NX))


def tilted_island_cube(n=8, tilt=0.2):
    """``cube_with_island`` rotated off the axes: an invalid labeling on a non-polycube input."""
    mesh, labels = cube_with_island(n)
    return transformed(mesh, axis_angle_matrix([1, 2, 3], tilt)), labels
