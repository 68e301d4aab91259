import warnings

import numpy as np
import pytest
from _oracle import brute_energy, fd_gradient, random_mesh

from polydeform import deform as dm
from polydeform import fixtures as fx
from polydeform.deform import (
    DeformConfig,
    SolverError,
    TopologyDefectWarning,
    assemble_laplacian,
    assemble_rhs,
    build_system,
    deform,
    flatten_charts,
    poisson_energy,
    solve,
)
from polydeform.labeling import FaceLabeling, build_chart_graph, nearest_axis_label
from polydeform.mesh import SurfaceMesh, bounding_box_diagonal
from polydeform.rotation import axis_angle_matrix, compute_rotation_field

EQUILATERAL = SurfaceMesh([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]], [[0, 1, 2]])


def test_laplacian_equilateral():
    L = assemble_laplacian(EQUILATERAL).toarray()
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(L[off], -1 / np.sqrt(3), atol=1e-12)
    assert np.allclose(np.diag(L), 2 / np.sqrt(3), atol=1e-12)


def test_laplacian_unit_square_diagonal():
    sq = SurfaceMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    L = assemble_laplacian(sq).toarray()
    # the diagonal is opposite both right angles; each outer edge has one 45 degree corner
    assert abs(L[0, 2]) < 1e-12
    assert L[0, 1] == pytest.approx(-1.0, abs=1e-12)
    assert L[0, 0] == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("make", [fx.sphere, fx.torus, fx.open_cylinder, lambda: fx.polycube_mobius()[0]])
def test_laplacian_row_sums_and_symmetry(make):
    L = assemble_laplacian(make())
    rows = np.asarray(L.sum(axis=1)).ravel()
    rowmax = abs(L).max(axis=1).toarray().ravel()
    assert np.all(np.abs(rows) <= 1e-9 * rowmax)
    assert abs(L - L.T).max() <= 1e-12 * abs(L).max()


def test_identity_rotations_give_lx():
    m = fx.sphere(3)
    R = np.broadcast_to(np.eye(3), (m.n_faces, 3, 3))
    assert np.allclose(assemble_rhs(m, R), assemble_laplacian(m) @ m.vertices, atol=1e-12)


def test_single_triangle_rotated_in_plane():
    R = axis_angle_matrix([0, 0, 1], np.pi / 2)
    L = assemble_laplacian(EQUILATERAL)
    b = assemble_rhs(EQUILATERAL, R[None])
    x, _ = solve(build_system(EQUILATERAL, L, b))
    want = EQUILATERAL.vertices @ R.T
    assert np.allclose(x - x[0], want - want[0], atol=1e-12)


def test_identity_solve_reproduces_cube():
    m = fx.cube(3)
    R = np.broadcast_to(np.eye(3), (m.n_faces, 3, 3))
    x, res = solve(build_system(m, assemble_laplacian(m), assemble_rhs(m, R)), mesh=m, recenter_to=m.vertices)
    assert res <= 1e-10
    assert np.abs(x - m.vertices).max() <= 1e-9 * bounding_box_diagonal(m)


def test_rigid_field_rotates_mesh():
    m = fx.sphere(3)
    R = axis_angle_matrix([1, 2, 3], 0.7)
    b = assemble_rhs(m, np.broadcast_to(R, (m.n_faces, 3, 3)))
    x, _ = solve(build_system(m, assemble_laplacian(m), b), mesh=m, recenter_to=m.vertices)
    want = m.vertices @ R.T
    assert np.abs((x - x.mean(0)) - (want - want.mean(0))).max() < 1e-8


def test_two_components_recentered_independently():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]], dtype=float)
    m = SurfaceMesh(v, [[0, 1, 2], [3, 4, 5]])
    R = np.stack([axis_angle_matrix([0, 0, 1], 0.3), axis_angle_matrix([0, 0, 1], -1.0)])
    x, _ = solve(build_system(m, assemble_laplacian(m), assemble_rhs(m, R)), mesh=m, recenter_to=v)
    for comp, rot in ((slice(0, 3), R[0]), (slice(3, 6), R[1])):
        assert np.allclose(x[comp].mean(0), v[comp].mean(0), atol=1e-12)
        assert np.allclose(x[comp] - x[comp].mean(0), (v[comp] - v[comp].mean(0)) @ rot.T, atol=1e-12)


def test_gradient_matches_brute_force_on_one_mesh(rng):
    m = random_mesh(rng)
    lab = FaceLabeling(rng.integers(0, 6, m.n_faces))
    R = compute_rotation_field(m, lab).rotations
    xp = m.vertices + rng.normal(scale=0.2, size=m.vertices.shape)
    grad = 2 * (assemble_laplacian(m) @ xp - assemble_rhs(m, R))
    fd = fd_gradient(m.vertices, m.faces, xp, R)
    assert np.linalg.norm(fd - grad) <= 1e-5 * np.linalg.norm(grad)
    assert poisson_energy(m, xp, R) == pytest.approx(brute_energy(m.vertices, m.faces, xp, R), rel=1e-12)


def test_solve_minimizes_energy(rng):
    m = fx.sphere(2)
    R = compute_rotation_field(m, FaceLabeling(rng.integers(0, 6, m.n_faces))).rotations
    x, _ = solve(build_system(m, assemble_laplacian(m), assemble_rhs(m, R)), mesh=m, recenter_to=m.vertices)
    e = poisson_energy(m, x, R)
    assert e <= poisson_energy(m, m.vertices, R)
    for _ in range(5):
        assert e <= poisson_energy(m, x + rng.normal(scale=1e-3, size=x.shape), R)


def test_singular_factorization_is_solver_error(monkeypatch):
    def boom(A):
        raise RuntimeError("Factor is exactly singular")

    monkeypatch.setattr(dm.spla, "splu", boom)
    m = fx.cube()
    with pytest.raises(SolverError) as err:
        deform(m, nearest_axis_label(m))
    assert err.value.trace is not None and err.value.trace.status is None


def test_unreachable_tolerance_is_solver_error():
    m = fx.sphere(2)
    with pytest.raises(SolverError, match="residual"):
        deform(m, nearest_axis_label(m), DeformConfig(solver_tolerance=1e-30))


def test_cube_fixed_point():
    m = fx.cube(2)
    out, trace = deform(m, nearest_axis_label(m))
    assert trace.status == dm.STATUS_ANGLE and trace.iterations == 1
    assert np.abs(out.vertices - m.vertices).max() <= 1e-9 * bounding_box_diagonal(m)


def test_rotated_cube_becomes_box(rotated_cube_run):
    run = rotated_cube_run
    assert run.trace.converged
    x = run.output.vertices
    edges = run.mesh.edges
    l0 = np.linalg.norm(np.diff(run.mesh.vertices[edges], axis=1), axis=2)
    l1 = np.linalg.norm(np.diff(x[edges], axis=1), axis=2)
    assert np.allclose(l1, l0, rtol=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        DeformConfig(max_iterations=0)
    with pytest.raises(ValueError):
        DeformConfig(angle_tolerance=0)
    with pytest.raises(ValueError):
        DeformConfig(stall_tolerance=-1.0)


def test_label_count_checked():
    m = fx.cube()
    with pytest.raises(ValueError, match="11 labels"):
        deform(m, FaceLabeling(np.zeros(11, dtype=int)))


def test_trace_contents(sphere_run):
    t = sphere_run.trace
    assert t.iterations <= 150 and t.records[-1].max_angle < 1e-4
    assert [r.iteration for r in t.records] == list(range(1, t.iterations + 1))
    d = t.to_dict()
    assert d["status"] == "converged_angle" and "wall_time" not in d["records"][0]
    assert all(r.residual <= 1e-10 for r in t.records)


@pytest.mark.parametrize("name", ["sphere_run", "torus_run", "cylinder_run", "mobius_run", "rotated_cube_run", "defect_run"])
def test_final_error_not_above_first(name, request):
    recs = request.getfixturevalue(name).trace.records
    assert recs[-1].max_angle <= recs[0].max_angle


def test_max_iterations_status():
    m, lab = fx.rotated_cube()
    _, trace = deform(m, lab, DeformConfig(max_iterations=2))
    assert trace.status == dm.STATUS_MAX_ITER and trace.iterations == 2 and not trace.converged


def test_stall_status():
    m = fx.sphere(2)
    _, trace = deform(m, nearest_axis_label(m), DeformConfig(angle_tolerance=1e-14, stall_tolerance=1e-3))
    assert trace.status == dm.STATUS_STALL


def test_frozen_weights_still_converge():
    m, lab = fx.rotated_cube()
    _, trace = deform(m, lab, DeformConfig(refresh_weights=False))
    assert trace.converged


def test_determinism():
    m = fx.sphere(3)
    lab = nearest_axis_label(m)
    a, ta = deform(m, lab)
    b, tb = deform(m, lab)
    assert np.array_equal(a.vertices, b.vertices)
    assert ta.to_dict() == tb.to_dict()


def test_rigid_equivariance():
    m = fx.sphere(3)
    lab = nearest_axis_label(m)
    Q = axis_angle_matrix([0, 0, 1], np.pi / 2)
    Q = np.round(Q)
    # +X->+Y, -X->-Y, +Y->-X, -Y->+X
    perm = [2, 3, 1, 0, 4, 5]
    out, _ = deform(m, lab)
    out_q, _ = deform(fx.transformed(m, Q, translation=[0.3, -1.0, 2.0]), lab.permuted(perm))
    a = out.vertices @ Q.T
    b = out_q.vertices
    assert np.abs((a - a.mean(0)) - (b - b.mean(0))).max() < 1e-8


def test_flatten_is_idempotent_on_polycube():
    m = fx.cube(3)
    out = flatten_charts(m, build_chart_graph(m, nearest_axis_label(m)))
    assert np.array_equal(out.vertices, m.vertices)


def test_flatten_exact_on_sphere(sphere_flat_run):
    run = sphere_flat_run
    g = build_chart_graph(run.mesh, run.labels)
    x = run.output.vertices
    for c in range(g.n_charts):
        coord = x[np.unique(run.mesh.faces[g.chart_faces[c]]), int(g.chart_labels[c]) // 2]
        assert np.all(coord == coord[0])


def test_flatten_warns_on_same_axis_corner():
    m, lab = fx.cube_split_top(2)
    g = build_chart_graph(m, lab)
    with pytest.warns(TopologyDefectWarning):
        a = flatten_charts(m, g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = flatten_charts(m, g)
    assert np.array_equal(a.vertices, b.vertices)
