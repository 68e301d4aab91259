"""Distortion and polycube-quality measurements between an original and a deformed mesh."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .deform import project_to_rotations
from .mesh import MeshError, bounding_box_diagonal, face_areas, halfedge_cotangents
from .rotation import alignment_error


def _check_pair(a, b):
    if not a.same_connectivity(b):
        raise MeshError(
            f"connectivity mismatch: {a.n_vertices} vertices / {a.n_faces} faces "
            f"vs {b.n_vertices} vertices / {b.n_faces} faces"
        )


def edge_area_errors(original, deformed):
    """Mean absolute relative change of edge lengths and of face areas."""
    _check_pair(original, deformed)
    e = original.edges
    l0 = np.linalg.norm(original.vertices[e[:, 0]] - original.vertices[e[:, 1]], axis=1)
    l1 = np.linalg.norm(deformed.vertices[e[:, 0]] - deformed.vertices[e[:, 1]], axis=1)
    a0 = face_areas(original.vertices, original.faces)
    a1 = face_areas(deformed.vertices, deformed.faces)
    return float(np.mean(np.abs(l1 - l0) / l0)), float(np.mean(np.abs(a1 - a0) / a0))


def _edge_vectors(positions, faces):
    nxt = faces[:, [1, 2, 0]]
    return positions[faces] - positions[nxt]


def optimal_rotations(source, target, cot=None):
    """Per-face rotation maximizing the cot-weighted agreement of source and target edges."""
    if cot is None:
        cot = halfedge_cotangents(source.vertices, source.faces)
    e = _edge_vectors(source.vertices, source.faces)
    d = _edge_vectors(target.vertices, source.faces)
    return project_to_rotations(np.einsum("fk,fki,fkj->fij", cot, e, d))


def stretching_energy(source, target):
    """Cot-weighted halfedge energy of ``target`` against best-rotated ``source`` edges.

    Weights are the source mesh's cotangents; each face gets its own optimal
    rotation, so the value vanishes for rigid motions.
    """
    _check_pair(source, target)
    source.check_nondegenerate()
    cot = halfedge_cotangents(source.vertices, source.faces)
    R = optimal_rotations(source, target, cot)
    e = _edge_vectors(source.vertices, source.faces)
    d = _edge_vectors(target.vertices, source.faces)
    r = d - np.einsum("fij,fkj->fki", R, e)
    return float(np.sum(cot * np.einsum("fki,fki->fk", r, r)))


def symmetric_stretch(a, b):
    return stretching_energy(a, b) + stretching_energy(b, a)


def chart_planarity(positions, graph, faces, diag):
    out = np.zeros(graph.n_charts)
    for c in range(graph.n_charts):
        verts = np.unique(faces[graph.chart_faces[c]])
        coord = positions[verts, int(graph.chart_labels[c]) // 2]
        dev = coord - coord[0]
        dev = dev - dev.mean()
        out[c] = np.sqrt(np.mean(dev * dev)) / diag
    return out


def boundary_edge_straightness(positions, mesh, graph):
    """Angle to the nearest coordinate axis for each interior edge between two charts."""
    he = np.arange(3 * mesh.n_faces)
    tw = mesh.twin
    inner = he[tw > he]
    cut = graph.face_chart[inner // 3] != graph.face_chart[tw[inner] // 3]
    h = inner[cut]
    f, k = h // 3, h % 3
    v = mesh.faces[f, k]
    w = mesh.faces[f, (k + 1) % 3]
    d = positions[w] - positions[v]
    ratio = np.abs(d).max(axis=1) / np.linalg.norm(d, axis=1)
    return np.arccos(np.clip(ratio, -1.0, 1.0))


def planarity_and_straightness(deformed, graph, diag=None):
    """Return ``(per_chart_planarity, straightness_angles)``.

    ``diag`` should be the original mesh's bounding-box diagonal; it defaults
    to the deformed mesh's own.
    """
    if diag is None:
        diag = bounding_box_diagonal(deformed)
    pos = deformed.vertices
    return chart_planarity(pos, graph, deformed.faces, diag), boundary_edge_straightness(pos, deformed, graph)


CSV_COLUMNS = (
    "model",
    "max_alignment_angle",
    "mean_alignment_angle",
    "planarity_max",
    "straightness_max",
    "straightness_mean",
    "edge_error",
    "area_error",
    "stretch_energy_forward",
    "stretch_energy_backward",
    "stretch_energy_symmetric",
)


@dataclass
class QualityReport:
    max_alignment_angle: float
    mean_alignment_angle: float
    planarity: list = field(default_factory=list)
    planarity_max: float = 0.0
    straightness_max: float = 0.0
    straightness_mean: float = 0.0
    edge_error: float = 0.0
    area_error: float = 0.0
    stretch_energy_forward: float = 0.0
    stretch_energy_backward: float = 0.0
    stretch_energy_symmetric: float = 0.0

    def to_dict(self):
        return asdict(self)

    def csv_row(self, model=""):
        d = self.to_dict()
        d["model"] = model
        return [d[c] if c == "model" else repr(float(d[c])) for c in CSV_COLUMNS]


def format_csv(rows, header=True):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def quality_report(original, deformed, labeling, graph):
    _check_pair(original, deformed)
    diag = bounding_box_diagonal(original)
    mx, mean = alignment_error(deformed, labeling)
    planar, straight = planarity_and_straightness(deformed, graph, diag)
    edge_err, area_err = edge_area_errors(original, deformed)
    fwd = stretching_energy(original, deformed)
    bwd = stretching_energy(deformed, original)
    return QualityReport(
        max_alignment_angle=mx,
        mean_alignment_angle=mean,
        planarity=[float(p) for p in planar],
        planarity_max=float(planar.max()) if len(planar) else 0.0,
        straightness_max=float(straight.max()) if len(straight) else 0.0,
        straightness_mean=float(straight.mean()) if len(straight) else 0.0,
        edge_error=edge_err,
        area_error=area_err,
        stretch_energy_forward=fwd,
        stretch_energy_backward=bwd,
        stretch_energy_symmetric=fwd + bwd,
    )
