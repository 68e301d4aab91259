"""Per-face rotations carrying face normals onto their labeled axes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import face_areas, face_normals

PARALLEL_EPS = 1e-12
UNIT_TOL = 1e-9


def _skew(v):
    z = np.zeros(v.shape[:-1])
    return np.stack(
        [
            np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
            np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
            np.stack([-v[..., 1], v[..., 0], z], axis=-1),
        ],
        axis=-2,
    )


def _rodrigues(a, b):
    # R = I + K + K^2 / (1 + a.b), with 1 + a.b = |a + b|^2 / 2 for accuracy near pi
    K = _skew(np.cross(a, b))
    s = a + b
    one_plus_c = 0.5 * np.einsum("...i,...i->...", s, s)
    return np.eye(3) + K + (K @ K) / one_plus_c[..., None, None]


def _half_turn_axis(a):
    k = np.argmin(np.abs(a), axis=-1)
    e = np.zeros_like(a)
    np.put_along_axis(e, k[..., None], 1.0, axis=-1)
    axis = e - np.einsum("...i,...i->...", e, a)[..., None] * a
    return axis / np.linalg.norm(axis, axis=-1, keepdims=True)


def rotations_between(a, b):
    """Vectorized minimal rotations with ``R @ a[i] == b[i]``; inputs are ``(N, 3)`` unit vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.empty(a.shape[:-1] + (3, 3))
    cr = np.cross(a, b)
    s2 = np.einsum("...i,...i->...", cr, cr)
    anti = (s2 < PARALLEL_EPS) & (np.einsum("...i,...i->...", a, b) < 0)
    regular = ~anti
    if regular.any():
        out[regular] = _rodrigues(a[regular], b[regular])
    if anti.any():
        # half turn about a deterministic axis perpendicular to a, then the tiny
        # residual rotation from -a onto b (identity when exactly opposite)
        ax = _half_turn_axis(a[anti])
        half = 2.0 * np.einsum("ni,nj->nij", ax, ax) - np.eye(3)
        out[anti] = _rodrigues(-a[anti], b[anti]) @ half
    return out


def rotation_between(from_vec, to_vec):
    a = np.asarray(from_vec, dtype=np.float64)
    b = np.asarray(to_vec, dtype=np.float64)
    for name, v in (("from", a), ("to", b)):
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
            raise ValueError(f"{name} vector must be a unit 3-vector, got {v!r}")
    return rotations_between(a[None], b[None])[0]


def axis_angle_matrix(axis, angle):
    """Rotation by ``angle`` about unit ``axis`` (Rodrigues' formula)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = _skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True)
class RotationField:
    rotations: np.ndarray
    reference_normals: np.ndarray
    signs: np.ndarray

    def __len__(self):
        return len(self.rotations)


def resolve_signs(normals, targets, previous=None):
    if previous is None:
        ref = targets
    else:
        ref = previous.reference_normals
    return np.where(np.einsum("ij,ij->i", normals, ref) >= 0.0, 1.0, -1.0)


def compute_rotation_field(mesh, labeling, previous=None, positions=None):
    """Rotate each (sign-resolved) face normal onto its target axis.

    The sign of each face normal starts target-aligned and afterwards
    follows the previous field's reference normal, which keeps faces of
    non-orientable meshes from flipping between iterations.
    """
    pos = mesh.vertices if positions is None else positions
    mesh.check_nondegenerate(pos)
    n = face_normals(pos, mesh.faces)
    targets = labeling.targets
    signs = resolve_signs(n, targets, previous)
    ref = n * signs[:, None]
    return RotationField(rotations=rotations_between(ref, targets), reference_normals=ref, signs=signs)


def face_alignment_angles(mesh, labeling, previous=None, positions=None):
    pos = mesh.vertices if positions is None else positions
    n = face_normals(pos, mesh.faces)
    t = labeling.targets
    ref = n * resolve_signs(n, t, previous)[:, None]
    return np.arctan2(np.linalg.norm(np.cross(ref, t), axis=1), np.einsum("ij,ij->i", ref, t))


def alignment_error(mesh, labeling, previous=None, positions=None):
    """Return ``(max_angle, area_weighted_mean_angle)`` in radians."""
    pos = mesh.vertices if positions is None else positions
    ang = face_alignment_angles(mesh, labeling, previous, pos)
    w = face_areas(pos, mesh.faces)
    return float(ang.max()), float(np.dot(w, ang) / w.sum())
