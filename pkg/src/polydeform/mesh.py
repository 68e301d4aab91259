"""Indexed triangle mesh with half-edge adjacency and per-face geometry.

Half-edge ``h = 3*f + k`` runs from ``faces[f, k]`` to ``faces[f, (k+1) % 3]``;
the corner opposite to it is ``faces[f, (k+2) % 3]``. Per-halfedge arrays of
shape ``(F, 3)`` use the same ``k`` index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

DEGENERATE_AREA_FACTOR = 1e-12
COT_CLAMP = 1e6


class MeshError(ValueError):
    """Raised for malformed or non-manifold mesh input."""


class DegenerateFaceError(MeshError):
    """Raised when a face has (numerically) zero area."""

    def __init__(self, face, area, threshold):
        self.face = int(face)
        self.area = float(area)
        self.threshold = float(threshold)
        super().__init__(
            f"degenerate face {self.face}: area {self.area:.3e} below threshold {self.threshold:.3e}"
        )


@dataclass(frozen=True)
class FaceGeometry:
    unit_normal: np.ndarray
    area: float
    corner_angles: np.ndarray


class SurfaceMesh:
    """Immutable triangle mesh.

    ``vertices`` holds the positions this instance represents; deformed
    copies share connectivity through :meth:`with_vertices`.
    """

    def __init__(self, vertices, faces):
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if len(faces) == 0:
            raise MeshError("mesh has no faces")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face references an out-of-range vertex index")
        repeated = np.flatnonzero(
            (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 2] == faces[:, 0])
        )
        if len(repeated):
            raise MeshError(f"face {int(repeated[0])} repeats a vertex")
        vertices.setflags(write=False)
        faces.setflags(write=False)
        self.vertices = vertices
        self.faces = faces
        self._build_topology()

    def _build_topology(self):
        F = self.faces
        tail = F.reshape(-1)
        head = F[:, [1, 2, 0]].reshape(-1)
        lo = np.minimum(tail, head)
        hi = np.maximum(tail, head)
        keys = lo * len(self.vertices) + hi
        uniq, edge_of_he, counts = np.unique(keys, return_inverse=True, return_counts=True)
        bad = np.flatnonzero(counts > 2)
        if len(bad):
            k = uniq[bad[0]]
            v, w = divmod(int(k), len(self.vertices))
            raise MeshError(f"non-manifold edge ({v}, {w}) has {int(counts[bad[0]])} incident faces")
        self.edges = np.column_stack(divmod(uniq, len(self.vertices))).astype(np.int64)
        self.edge_of_halfedge = edge_of_he.reshape(-1)

        # twin: the other halfedge on the same undirected edge (direction not assumed)
        order = np.argsort(self.edge_of_halfedge, kind="stable")
        twin = np.full(len(order), -1, dtype=np.int64)
        sorted_edges = self.edge_of_halfedge[order]
        pair = np.flatnonzero(sorted_edges[1:] == sorted_edges[:-1])
        twin[order[pair]] = order[pair + 1]
        twin[order[pair + 1]] = order[pair]
        self.twin = twin
        self.edge_face_count = counts

        nv = len(self.vertices)
        adj = sparse.coo_matrix((np.ones(len(tail)), (tail, head)), shape=(nv, nv))
        n, labels = connected_components(adj, directed=False)
        self.n_components = int(n)
        self.vertex_component = labels
        for arr in (self.edges, self.edge_of_halfedge, self.twin, self.edge_face_count, self.vertex_component):
            arr.setflags(write=False)

    # ------------------------------------------------------------------ queries
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def face_component(self):
        return self.vertex_component[self.faces[:, 0]]

    def halfedge(self, h):
        """Return ``(tail, head, face, opposite_vertex, twin)`` for halfedge ``h``."""
        f, k = divmod(int(h), 3)
        face = self.faces[f]
        return int(face[k]), int(face[(k + 1) % 3]), f, int(face[(k + 2) % 3]), int(self.twin[h])

    def is_boundary_halfedge(self, h):
        return self.twin[h] < 0

    def boundary_edge_mask(self):
        return self.edge_face_count == 1

    def boundary_loop_count(self):
        be = self.edges[self.boundary_edge_mask()]
        if len(be) == 0:
            return 0
        nv = self.n_vertices
        g = sparse.coo_matrix((np.ones(len(be)), (be[:, 0], be[:, 1])), shape=(nv, nv))
        n, labels = connected_components(g, directed=False)
        return len(np.unique(labels[np.unique(be)]))

    def euler_characteristic(self):
        used = len(np.unique(self.faces))
        return used - self.n_edges + self.n_faces

    def with_vertices(self, vertices):
        """Copy sharing this mesh's connectivity with new positions."""
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        if vertices.shape != self.vertices.shape:
            raise MeshError("vertex array shape does not match mesh")
        new = object.__new__(SurfaceMesh)
        vertices.setflags(write=False)
        new.__dict__.update(self.__dict__)
        new.vertices = vertices
        return new

    def same_connectivity(self, other):
        return self.faces.shape == other.faces.shape and bool(np.array_equal(self.faces, other.faces))

    def degenerate_area_threshold(self):
        return DEGENERATE_AREA_FACTOR * bounding_box_diagonal(self) ** 2

    def check_nondegenerate(self, positions=None):
        """Raise :class:`DegenerateFaceError` for the first face below the area threshold."""
        areas = face_areas(self.vertices if positions is None else positions, self.faces)
        thr = self.degenerate_area_threshold()
        bad = np.flatnonzero(~(areas > thr))
        if len(bad):
            raise DegenerateFaceError(bad[0], areas[bad[0]], thr)
        return areas


# ---------------------------------------------------------------- geometry


def bounding_box_diagonal(mesh_or_points):
    pts = mesh_or_points.vertices if isinstance(mesh_or_points, SurfaceMesh) else np.asarray(mesh_or_points)
    if len(pts) == 0:
        raise MeshError("empty mesh has no bounding box")
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def face_cross(positions, faces):
    p = positions[faces]
    return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def face_areas(positions, faces):
    return 0.5 * np.linalg.norm(face_cross(positions, faces), axis=1)


def face_normals(positions, faces):
    """Unit normals in stored winding. Zero-area faces yield NaN."""
    c = face_cross(positions, faces)
    with np.errstate(invalid="ignore", divide="ignore"):
        return c / np.linalg.norm(c, axis=1)[:, None]


def corner_angles(positions, faces):
    """Interior angle at each corner, shape ``(F, 3)``; column k is the angle at ``faces[:, k]``."""
    p = positions[faces]
    out = np.empty((len(faces), 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        out[:, k] = np.arctan2(np.linalg.norm(np.cross(u, w), axis=1), np.einsum("ij,ij->i", u, w))
    return out


def halfedge_cotangents(positions, faces, clamp=COT_CLAMP):
    """Cotangent of the corner opposite each halfedge, shape ``(F, 3)``.

    Entry ``[f, k]`` belongs to halfedge ``faces[f,k] -> faces[f,(k+1)%3]``,
    whose opposite corner is ``faces[f,(k+2)%3]``.
    """
    p = positions[faces]
    out = np.empty((len(faces), 3))
    for k in range(3):
        o = p[:, (k + 2) % 3]
        u = p[:, k] - o
        w = p[:, (k + 1) % 3] - o
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        dot = np.einsum("ij,ij->i", u, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, k] = dot / cross
    out[np.isnan(out)] = clamp
    return np.clip(out, -clamp, clamp)


def face_geometry(mesh, face):
    f = int(face)
    if not 0 <= f < mesh.n_faces:
        raise IndexError(f"face {f} out of range")
    tri = mesh.faces[f : f + 1]
    area = float(face_areas(mesh.vertices, tri)[0])
    thr = mesh.degenerate_area_threshold()
    if not area > thr:
        raise DegenerateFaceError(f, area, thr)
    return FaceGeometry(
        unit_normal=face_normals(mesh.vertices, tri)[0],
        area=area,
        corner_angles=corner_angles(mesh.vertices, tri)[0],
    )


def cot_weight(mesh, halfedge):
    f, k = divmod(int(halfedge), 3)
    face_geometry(mesh, f)
    return float(halfedge_cotangents(mesh.vertices, mesh.faces[f : f + 1])[0, k])
