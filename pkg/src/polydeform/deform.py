"""Iterative rotation-driven Poisson deformation towards a polycube."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .labeling import build_chart_graph
from .mesh import bounding_box_diagonal, face_areas, face_normals, halfedge_cotangents
from .rotation import alignment_error, compute_rotation_field

STATUS_ANGLE = "converged_angle"
STATUS_STALL = "converged_stall"
STATUS_MAX_ITER = "max_iterations_reached"


class SolverError(RuntimeError):
    def __init__(self, message, residual=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.trace = trace


class TopologyDefectWarning(UserWarning):
    pass


@dataclass
class DeformConfig:
    max_iterations: int = 150
    angle_tolerance: float = 1e-4
    stall_tolerance: float | None = None  # absolute; None -> 1e-9 * bbox diagonal
    refresh_weights: bool = True
    flatten: bool = False
    solver_tolerance: float = 1e-10
    rebase_ratio: float = 0.9

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("angle_tolerance", "solver_tolerance", "rebase_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.stall_tolerance is not None and not self.stall_tolerance > 0:
            raise ValueError("stall_tolerance must be positive")

    def resolved_stall_tolerance(self, mesh):
        if self.stall_tolerance is not None:
            return float(self.stall_tolerance)
        return 1e-9 * bounding_box_diagonal(mesh)

    def to_dict(self):
        return asdict(self)


@dataclass
class IterationRecord:
    iteration: int
    max_angle: float
    mean_angle: float
    max_displacement: float
    residual: float
    energy: float
    sign_flips: int
    rebased: bool
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing=True):
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d


@dataclass
class DeformTrace:
    records: list = field(default_factory=list)
    status: str | None = None
    initial_max_angle: float = float("nan")
    initial_mean_angle: float = float("nan")

    @property
    def iterations(self):
        return len(self.records)

    @property
    def converged(self):
        return self.status in (STATUS_ANGLE, STATUS_STALL)

    def to_dict(self, timing=False):
        return {
            "status": self.status,
            "iterations": self.iterations,
            "initial_max_angle": self.initial_max_angle,
            "initial_mean_angle": self.initial_mean_angle,
            "records": [r.to_dict(timing=timing) for r in self.records],
        }

    def wall_times(self):
        return [r.wall_time for r in self.records]


# ------------------------------------------------------------------ assembly


def _halfedge_ends(mesh):
    F = mesh.faces
    return F.reshape(-1), F[:, [1, 2, 0]].reshape(-1)


def assemble_laplacian(mesh, positions=None, cot=None):
    """Cotangent Laplacian: ``L[v,w] = -(cot a_vw + cot a_wv)``, diagonal = minus the off-diagonal row sum.

    Weights come from ``positions`` (default: ``mesh.vertices``) unless an
    explicit ``(F, 3)`` halfedge cotangent array is passed.
    """
    if cot is None:
        cot = halfedge_cotangents(mesh.vertices if positions is None else positions, mesh.faces)
    tail, head = _halfedge_ends(mesh)
    c = cot.reshape(-1)
    n = mesh.n_vertices
    rows = np.concatenate([tail, head, tail, head])
    cols = np.concatenate([head, tail, tail, head])
    vals = np.concatenate([-c, -c, c, c])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_rhs(mesh, rotations, edge_positions=None, weight_positions=None, cot=None):
    """``b_v = sum_w [cot(a_vw) R(t_vw) + cot(a_wv) R(t_wv)] (x_v - x_w)``.

    ``edge_positions`` supplies the ``x`` of the edge vectors; weights come
    from ``weight_positions`` (or ``cot``), both defaulting to the mesh.
    """
    ex = mesh.vertices if edge_positions is None else edge_positions
    if cot is None:
        cot = halfedge_cotangents(mesh.vertices if weight_positions is None else weight_positions, mesh.faces)
    tail, head = _halfedge_ends(mesh)
    e = (ex[tail] - ex[head]).reshape(-1, 3, 3)  # (F, k, xyz)
    re = np.einsum("fij,fkj->fki", rotations, e) * cot[:, :, None]
    re = re.reshape(-1, 3)
    b = np.zeros((mesh.n_vertices, 3))
    np.add.at(b, tail, re)
    np.add.at(b, head, -re)
    return b


def poisson_energy(mesh, positions, rotations, edge_positions=None, weight_positions=None, cot=None):
    """Stretching energy with fixed per-face rotations, summed over halfedges."""
    ex = mesh.vertices if edge_positions is None else edge_positions
    if cot is None:
        cot = halfedge_cotangents(mesh.vertices if weight_positions is None else weight_positions, mesh.faces)
    tail, head = _halfedge_ends(mesh)
    d = (positions[tail] - positions[head]).reshape(-1, 3, 3)
    e = (ex[tail] - ex[head]).reshape(-1, 3, 3)
    r = d - np.einsum("fij,fkj->fki", rotations, e)
    return float(np.sum(cot * np.einsum("fki,fki->fk", r, r)))


# ------------------------------------------------------------------ solve


@dataclass
class PoissonSystem:
    laplacian: sparse.csr_matrix
    rhs: np.ndarray
    anchors: list  # [(vertex, position(3,))], one per connected component


def component_anchors(mesh, positions):
    comp = mesh.vertex_component
    _, first = np.unique(comp, return_index=True)
    return [(int(v), np.array(positions[v], dtype=np.float64)) for v in np.sort(first)]


def build_system(mesh, laplacian, rhs, positions=None):
    pos = mesh.vertices if positions is None else positions
    return PoissonSystem(laplacian=laplacian, rhs=np.asarray(rhs, dtype=np.float64), anchors=component_anchors(mesh, pos))


def _anchored(system):
    L = system.laplacian.tocsr()
    n = L.shape[0]
    idx = np.array([a for a, _ in system.anchors], dtype=np.int64)
    pinned = np.array([p for _, p in system.anchors]).reshape(-1, 3)
    keep = np.ones(n)
    keep[idx] = 0.0
    D = sparse.diags(keep)
    pin = np.zeros(n)
    pin[idx] = 1.0
    A = (D @ L @ D + sparse.diags(pin)).tocsc()
    xp = np.zeros((n, 3))
    xp[idx] = pinned
    rhs = system.rhs - L @ xp
    rhs[idx] = pinned
    return A, rhs


def area_centroids(mesh, positions):
    """Area-weighted centroid per connected component, shape ``(n_components, 3)``."""
    a = face_areas(positions, mesh.faces)
    c = positions[mesh.faces].mean(axis=1)
    comp = mesh.face_component
    w = np.bincount(comp, weights=a, minlength=mesh.n_components)
    out = np.stack([np.bincount(comp, weights=a * c[:, i], minlength=mesh.n_components) for i in range(3)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return out / w[:, None], w > 0


def solve(system, mesh=None, recenter_to=None, tolerance=1e-10, max_refinements=5):
    """Solve the anchored system; return ``(positions, relative_residual)``.

    With ``mesh`` and ``recenter_to`` given, each component is translated so
    its area-weighted centroid matches the one of ``recenter_to``.
    """
    A, rhs = _anchored(system)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from None
    x = lu.solve(rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    res = np.linalg.norm(rhs - A @ x) / scale
    for _ in range(max_refinements):
        if res <= tolerance:
            break
        x = x + lu.solve(rhs - A @ x)
        res = np.linalg.norm(rhs - A @ x) / scale
    if not res <= tolerance:
        raise SolverError(f"linear solve reached relative residual {res:.3e} > {tolerance:.1e}", residual=res)
    if mesh is not None and recenter_to is not None:
        want, ok = area_centroids(mesh, recenter_to)
        have, _ = area_centroids(mesh, x)
        shift = np.where(ok[:, None], want - have, 0.0)
        x = x + shift[mesh.vertex_component]
    return x, float(res)


# ------------------------------------------------------------------ iteration


def fitted_rotations(mesh, reference, current, cot=None):
    """Per-face rotation best mapping ``reference`` triangles onto ``current`` ones.

    Cot-weighted edge cross-covariance plus the normal outer product, so the
    fit is full rank; projected to SO(3).
    """
    if cot is None:
        cot = halfedge_cotangents(reference, mesh.faces)
    tail, head = _halfedge_ends(mesh)
    e = (reference[tail] - reference[head]).reshape(-1, 3, 3)
    d = (current[tail] - current[head]).reshape(-1, 3, 3)
    H = np.einsum("fk,fki,fkj->fij", cot, e, d)
    n0 = face_normals(reference, mesh.faces)
    n1 = face_normals(current, mesh.faces)
    area2 = 2.0 * face_areas(reference, mesh.faces)
    H += area2[:, None, None] * np.einsum("fi,fj->fij", n0, n1)
    return project_to_rotations(H)


def project_to_rotations(H):
    """Closest proper rotation ``R`` to ``H^T`` (maximizes ``tr(R H)``), batched."""
    U, _, Vt = np.linalg.svd(H)
    R = np.einsum("fji,fkj->fik", Vt, U)
    flip = np.linalg.det(R) < 0
    if flip.any():
        Vt = Vt.copy()
        Vt[flip, 2, :] *= -1
        R = np.einsum("fji,fkj->fik", Vt, U)
    return R


def deform(mesh, labeling, config=None, on_iteration=None):
    """Deform ``mesh`` until face normals match their labels.

    Each step rotates every face of the reference mesh by its best-fit
    rotation followed by the normal-correcting rotation of the current
    face, and solves the Poisson system for positions. The reference starts
    as the input mesh and is replaced by the current iterate whenever the
    alignment error stops improving by ``rebase_ratio`` (with the reference
    equal to the current mesh a step is the plain current-geometry update).

    Returns ``(deformed_mesh, trace)``. ``on_iteration(record, positions)``
    is called after each step.
    """
    config = config or DeformConfig()
    if len(labeling) != mesh.n_faces:
        raise ValueError(f"{len(labeling)} labels for {mesh.n_faces} faces")
    mesh.check_nondegenerate()
    stall_tol = config.resolved_stall_tolerance(mesh)
    original = np.array(mesh.vertices)
    original_cot = halfedge_cotangents(original, mesh.faces)
    x = original.copy()
    reference = original
    ref_is_current = True

    trace = DeformTrace()
    mx0, mean0 = alignment_error(mesh, labeling, positions=x)
    trace.initial_max_angle, trace.initial_mean_angle = mx0, mean0
    previous = None
    prev_max = np.inf

    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        try:
            field_ = compute_rotation_field(mesh, labeling, previous=previous, positions=x)
            cot_now = halfedge_cotangents(x, mesh.faces) if config.refresh_weights else original_cot
            fit = fitted_rotations(mesh, reference, x)
            R = np.einsum("fij,fjk->fik", field_.rotations, fit)
            L = assemble_laplacian(mesh, cot=cot_now)
            b = assemble_rhs(mesh, R, edge_positions=reference, cot=cot_now)
            system = build_system(mesh, L, b, positions=x)
            x_new, res = solve(system, mesh=mesh, recenter_to=x, tolerance=config.solver_tolerance)
            x_new.setflags(write=False)
            mesh.check_nondegenerate(x_new)
        except SolverError as exc:
            trace.status = None
            exc.trace = trace
            raise
        energy = poisson_energy(mesh, x_new, R, edge_positions=reference, cot=cot_now)
        disp = float(np.max(np.linalg.norm(x_new - x, axis=1)))
        flips = 0 if previous is None else int(np.count_nonzero(field_.signs != previous.signs))
        previous = field_
        x = x_new
        mx, mean = alignment_error(mesh, labeling, previous=previous, positions=x)

        rebased = False
        status = None
        if mx < config.angle_tolerance:
            status = STATUS_ANGLE
        elif disp < stall_tol:
            if ref_is_current:
                status = STATUS_STALL
            else:
                rebased = True
        elif mx > config.rebase_ratio * prev_max:
            rebased = True
        if rebased:
            reference = x
        ref_is_current = rebased
        prev_max = mx

        rec = IterationRecord(
            iteration=it,
            max_angle=mx,
            mean_angle=mean,
            max_displacement=disp,
            residual=res,
            energy=energy,
            sign_flips=flips,
            rebased=rebased,
            wall_time=time.perf_counter() - t0,
        )
        trace.records.append(rec)
        if on_iteration is not None:
            on_iteration(rec, x)
        if status is not None:
            trace.status = status
            break
    else:
        trace.status = STATUS_MAX_ITER

    out = mesh.with_vertices(x)
    if config.flatten:
        out = flatten_charts(out, build_chart_graph(mesh, labeling))
    return out, trace


def flatten_charts(mesh, graph):
    """Snap each chart's axis coordinate to its area-weighted mean.

    Means are taken on the incoming positions; assignments are applied in
    chart-id order. A vertex receiving the same axis from two charts keeps
    the later one and triggers a :class:`TopologyDefectWarning`.
    """
    x = np.array(mesh.vertices)
    src = mesh.vertices
    areas = face_areas(src, mesh.faces)
    assigned = {}
    clashes = set()
    for c in range(graph.n_charts):
        k = int(graph.chart_labels[c]) // 2
        fs = graph.chart_faces[c]
        verts = np.unique(mesh.faces[fs])
        base = src[verts[0], k]
        dev = src[mesh.faces[fs], k].mean(axis=1) - base
        a = areas[fs]
        mean = base + (np.dot(a, dev) / a.sum() if a.sum() > 0 else 0.0)
        for v in verts.tolist():
            key = (v, k)
            if key in assigned and assigned[key] != c:
                clashes.add(v)
            assigned[key] = c
        x[verts, k] = mean
    if clashes:
        warnings.warn(
            f"vertices {sorted(clashes)[:10]} lie on several charts with the same axis; later charts win",
            TopologyDefectWarning,
            stacklevel=2,
        )
    return mesh.with_vertices(x)
