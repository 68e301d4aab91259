"""Axis labels, chart extraction and polycube topology validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .mesh import face_normals


class LabelError(ValueError):
    pass


class AxisLabel(enum.IntEnum):
    PX = 0
    NX = 1
    PY = 2
    NY = 3
    PZ = 4
    NZ = 5

    @property
    def axis(self):
        return int(self) // 2

    @property
    def sign(self):
        return -1.0 if int(self) % 2 else 1.0

    @property
    def vector(self):
        v = np.zeros(3)
        v[self.axis] = self.sign
        return v

    def opposite(self):
        return AxisLabel(int(self) ^ 1)

    @property
    def token(self):
        return ("+", "-")[int(self) % 2] + "XYZ"[self.axis]

    @classmethod
    def parse(cls, token):
        token = token.strip()
        if token in _TOKENS:
            return cls(_TOKENS.index(token))
        if token.isdigit() and 0 <= int(token) < 6:
            return cls(int(token))
        raise LabelError(f"unknown axis label {token!r}")

    def __str__(self):
        return self.token


_TOKENS = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")
AXIS_VECTORS = np.array([AxisLabel(i).vector for i in range(6)])


@dataclass(frozen=True)
class FaceLabeling:
    """Per-face axis labels stored as integers 0..5 in ``+X,-X,+Y,-Y,+Z,-Z`` order."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.labels, dtype=np.int64).reshape(-1)
        if len(arr) and (arr.min() < 0 or arr.max() > 5):
            raise LabelError("labels must lie in 0..5")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, f):
        return AxisLabel(int(self.labels[f]))

    @property
    def targets(self):
        return AXIS_VECTORS[self.labels]

    @property
    def axes(self):
        return self.labels // 2

    def permuted(self, perm):
        """Relabel through ``perm``, a length-6 sequence mapping old label -> new label."""
        return FaceLabeling(np.asarray(perm)[self.labels])

    def tokens(self):
        return [_TOKENS[i] for i in self.labels]


def parse_labels(text, n_faces, source="<labels>"):
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(AxisLabel.parse(line)))
        except LabelError as exc:
            raise LabelError(f"{source}:{lineno}: {exc}") from None
    if len(out) != n_faces:
        raise LabelError(f"{source}: {len(out)} labels for {n_faces} faces")
    return FaceLabeling(np.array(out, dtype=np.int64))


def load_labels(path, mesh):
    with open(path, encoding="utf-8") as fh:
        return parse_labels(fh.read(), mesh.n_faces, source=str(path))


def format_labels(labeling):
    return "".join(t + "\n" for t in labeling.tokens())


def save_labels(labeling, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_labels(labeling))


def nearest_axis_label(mesh, positions=None):
    """Label each face with the axis of largest ``dot(normal, axis)``; first axis wins ties."""
    n = face_normals(mesh.vertices if positions is None else positions, mesh.faces)
    return FaceLabeling(np.argmax(n @ AXIS_VECTORS.T, axis=1))


# ------------------------------------------------------------------ charts


@dataclass
class ChartGraph:
    face_chart: np.ndarray
    chart_labels: np.ndarray
    chart_faces: list
    adjacency: list
    corners: dict
    boundary_corners: dict
    boundary_flags: np.ndarray
    chart_component: np.ndarray
    neighbors: list = field(repr=False, default=None)

    @property
    def n_charts(self):
        return len(self.chart_labels)

    def signature(self):
        """Canonical, hashable summary used to compare chart graphs between meshes."""
        deg = sorted(
            (AxisLabel(int(self.chart_labels[c])).token, len(self.neighbors[c]), int(len(self.chart_faces[c])))
            for c in range(self.n_charts)
        )
        return (self.n_charts, tuple(deg), len(self.adjacency), tuple(sorted(self.corners.items())))


def build_chart_graph(mesh, labeling):
    if len(labeling) != mesh.n_faces:
        raise LabelError(f"{len(labeling)} labels for {mesh.n_faces} faces")
    lab = labeling.labels
    he = np.arange(3 * mesh.n_faces)
    tw = mesh.twin
    interior = he[tw > he]
    fa, fb = interior // 3, tw[interior] // 3
    same = lab[fa] == lab[fb]
    nf = mesh.n_faces
    g = sparse.coo_matrix((np.ones(int(same.sum())), (fa[same], fb[same])), shape=(nf, nf))
    _, raw = connected_components(g, directed=False)
    # renumber charts by lowest face id so ids are stable
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    face_chart = remap[raw]
    n_charts = len(order)
    chart_labels = lab[np.sort(first)]
    chart_faces = [np.flatnonzero(face_chart == c) for c in range(n_charts)]

    ca, cb = face_chart[fa[~same]], face_chart[fb[~same]]
    pairs = {(int(min(a, b)), int(max(a, b))) for a, b in zip(ca, cb) if a != b}
    adjacency = sorted(pairs)
    neighbors = [set() for _ in range(n_charts)]
    for a, b in adjacency:
        neighbors[a].add(b)
        neighbors[b].add(a)

    boundary_he = he[tw < 0]
    boundary_flags = np.zeros(n_charts, dtype=bool)
    boundary_flags[face_chart[boundary_he // 3]] = True
    boundary_vertices = set(np.unique(mesh.faces.reshape(-1)[boundary_he]).tolist())
    boundary_vertices |= set(np.unique(mesh.faces[:, [1, 2, 0]].reshape(-1)[boundary_he]).tolist())

    vf = sparse.coo_matrix(
        (np.ones(3 * nf), (mesh.faces.reshape(-1), np.repeat(face_chart, 3))),
        shape=(mesh.n_vertices, n_charts),
    ).tocsr()
    vf.data[:] = 1.0  # tocsr merged duplicate (vertex, chart) entries
    counts = np.asarray(vf.sum(axis=1)).reshape(-1).astype(int)
    corners = {int(v): int(counts[v]) for v in np.flatnonzero(counts >= 3)}
    boundary_corners = {
        int(v): int(counts[v]) for v in np.flatnonzero(counts == 2) if int(v) in boundary_vertices
    }
    comp = mesh.face_component
    chart_component = np.array([comp[fs[0]] for fs in chart_faces], dtype=np.int64)
    return ChartGraph(
        face_chart=face_chart,
        chart_labels=chart_labels,
        chart_faces=chart_faces,
        adjacency=adjacency,
        corners=corners,
        boundary_corners=boundary_corners,
        boundary_flags=boundary_flags,
        chart_component=chart_component,
        neighbors=[sorted(s) for s in neighbors],
    )


@dataclass
class ValidityReport:
    few_neighbors: list
    opposite_pairs: list
    bad_corners: list
    strict: bool = False

    @property
    def condition_a(self):
        return not self.few_neighbors

    @property
    def condition_b(self):
        return not self.opposite_pairs

    @property
    def condition_c(self):
        return not self.bad_corners

    @property
    def valid(self):
        return self.condition_a and self.condition_b and self.condition_c

    @property
    def passed_count(self):
        return int(self.condition_a) + int(self.condition_b) + int(self.condition_c)

    def to_dict(self):
        return {
            "valid": self.valid,
            "strict": self.strict,
            "conditions": {
                "a_min_four_neighbors": {
                    "pass": self.condition_a,
                    "charts": [{"chart": c, "neighbors": n} for c, n in self.few_neighbors],
                },
                "b_no_opposite_neighbors": {
                    "pass": self.condition_b,
                    "chart_pairs": [list(p) for p in self.opposite_pairs],
                },
                "c_corner_valence_three": {
                    "pass": self.condition_c,
                    "vertices": [{"vertex": v, "charts": n} for v, n in self.bad_corners],
                },
            },
        }

    def summary_lines(self):
        lines = [f"{self.passed_count}/3 conditions pass"]
        if self.few_neighbors:
            lines.append(
                "(a) charts with fewer than 4 neighbors: "
                + ", ".join(f"{c} ({n})" for c, n in self.few_neighbors)
            )
        if self.opposite_pairs:
            lines.append("(b) adjacent charts with opposite labels: " + ", ".join(f"{a}-{b}" for a, b in self.opposite_pairs))
        if self.bad_corners:
            lines.append("(c) corners without valence 3: " + ", ".join(f"v{v} ({n})" for v, n in self.bad_corners))
        return lines


def validate_topology(graph, strict=False):
    """Check the three sufficient polycube conditions.

    Charts that touch a mesh boundary are exempt from the neighbor-count
    condition unless ``strict``. The checks are per chart / per vertex, so
    multi-component meshes are handled component by component implicitly.
    """
    few = [
        (c, len(graph.neighbors[c]))
        for c in range(graph.n_charts)
        if len(graph.neighbors[c]) < 4 and (strict or not graph.boundary_flags[c])
    ]
    opp = [(a, b) for a, b in graph.adjacency if graph.chart_labels[a] ^ 1 == graph.chart_labels[b]]
    bad = [(v, n) for v, n in sorted(graph.corners.items()) if n != 3]
    return ValidityReport(few_neighbors=few, opposite_pairs=opp, bad_corners=bad, strict=strict)
