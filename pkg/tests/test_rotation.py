import numpy as np
import pytest

from polydeform import fixtures as fx
from polydeform.labeling import FaceLabeling, nearest_axis_label
from polydeform.mesh import face_normals
from polydeform.rotation import (
    alignment_error,
    axis_angle_matrix,
    compute_rotation_field,
    face_alignment_angles,
    rotation_between,
    rotations_between,
)


def assert_rotation(R, tol=1e-10):
    assert np.abs(R.T @ R - np.eye(3)).max() < tol
    assert abs(np.linalg.det(R) - 1.0) < tol


def test_identity_for_equal_vectors():
    assert np.array_equal(rotation_between([0, 0, 1], [0, 0, 1]), np.eye(3))


def test_quarter_turn_rows():
    R = rotation_between([0, 0, 1], [1, 0, 0])
    assert np.allclose(R, [[0, 0, 1], [0, 1, 0], [-1, 0, 0]], atol=1e-15)
    assert_rotation(R)


def test_antiparallel_half_turn():
    R = rotation_between([0, 0, 1], [0, 0, -1])
    assert np.allclose(R, np.diag([1.0, -1.0, -1.0]), atol=1e-15)


@pytest.mark.parametrize("v", [[1, 0, 0], [0, 1, 0], [0.6, 0, 0.8], [1 / np.sqrt(3)] * 3])
def test_antiparallel_branch_is_a_rotation(v):
    v = np.array(v, dtype=float)
    R = rotation_between(v, -v)
    assert_rotation(R)
    assert np.allclose(R @ v, -v, atol=1e-12)


def test_nearly_antiparallel_is_accurate():
    a = np.array([0.0, 0.0, 1.0])
    b = np.array([1e-7, 0.0, -1.0])
    b /= np.linalg.norm(b)
    R = rotation_between(a, b)
    assert_rotation(R)
    assert np.allclose(R @ a, b, atol=1e-12)


def test_non_unit_input_rejected():
    with pytest.raises(ValueError, match="unit"):
        rotation_between([0, 0, 2], [1, 0, 0])


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(50, 3))
    b = rng.normal(size=(50, 3))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    Rs = rotations_between(a, b)
    for i in range(50):
        assert np.array_equal(Rs[i], rotation_between(a[i], b[i]))
        assert np.allclose(Rs[i] @ a[i], b[i], atol=1e-10)


def test_cube_field_is_identity():
    m = fx.cube()
    f = compute_rotation_field(m, nearest_axis_label(m))
    assert np.allclose(f.rotations, np.eye(3), atol=1e-15)
    assert (f.signs == 1).all()


def test_quarter_turned_cube_field():
    base = fx.cube()
    lab = nearest_axis_label(base)
    turn = axis_angle_matrix([0, 0, 1], np.pi / 2)
    f = compute_rotation_field(fx.transformed(base, turn), lab)
    side = lab.axes != 2
    # side faces need the inverse quarter turn; for +-Z faces the minimal rotation is the identity
    assert np.allclose(f.rotations[side], turn.T, atol=1e-12)
    assert np.allclose(f.rotations[~side], np.eye(3), atol=1e-12)


def test_sphere_cap_angles():
    m = fx.sphere()
    lab = nearest_axis_label(m)
    f = compute_rotation_field(m, lab)
    n = face_normals(m.vertices, m.faces)
    expected = np.arccos(np.clip(np.einsum("ij,ij->i", n, lab.targets), -1, 1))
    angles = face_alignment_angles(m, lab)
    assert np.allclose(angles, expected, atol=1e-7)
    assert angles[lab.labels == 4].max() < np.pi / 2
    for R, ref, t in zip(f.rotations[:40], f.reference_normals[:40], lab.targets[:40]):
        assert_rotation(R)
        assert np.allclose(R @ ref, t, atol=1e-10)


def test_alignment_error_of_tilted_cube():
    base = fx.cube()
    lab = nearest_axis_label(base)
    m = fx.transformed(base, axis_angle_matrix([0, 0, 1], 0.1))
    ang = face_alignment_angles(m, lab)
    side = lab.axes != 2
    assert np.allclose(ang[side], 0.1, atol=1e-12)
    assert np.allclose(ang[~side], 0.0, atol=1e-12)
    mx, mean = alignment_error(m, lab)
    assert mx == pytest.approx(0.1, abs=1e-12)
    assert mean == pytest.approx(0.1 * 8 / 12, abs=1e-12)
    assert alignment_error(base, lab) == (0.0, 0.0)


def test_sign_resolution_and_idempotence():
    m = fx.sphere(2)
    lab = FaceLabeling(np.full(m.n_faces, 1))  # -X everywhere
    f1 = compute_rotation_field(m, lab)
    n = face_normals(m.vertices, m.faces)
    assert np.array_equal(f1.signs, np.where(n[:, 0] <= 0, 1.0, -1.0))
    f2 = compute_rotation_field(m, lab, previous=f1)
    assert np.array_equal(f2.reference_normals, f1.reference_normals)


def test_sign_is_noop_for_aligned_normals():
    m = fx.sphere()
    f = compute_rotation_field(m, nearest_axis_label(m))
    assert np.array_equal(f.reference_normals, face_normals(m.vertices, m.faces))
