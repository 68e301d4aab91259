"""OBJ / OFF reading and writing (triangle subset, quads fan-split)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import MeshError, SurfaceMesh

FORMATS = ("obj", "off")


class MeshParseError(MeshError):
    pass


def detect_format(path):
    ext = Path(path).suffix.lower().lstrip(".")
    if ext not in FORMATS:
        raise MeshParseError(f"{path}: unknown mesh format {ext!r} (expected .obj or .off)")
    return ext


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _parse_obj(lines, path):
    verts, faces = [], []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
                if len(verts[-1]) != 3:
                    raise ValueError("vertex needs 3 coordinates")
            elif tok[0] == "f":
                idx = []
                for t in tok[1:]:
                    i = int(t.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError("face needs at least 3 vertices")
                faces.extend(_fan(idx))
        except ValueError as exc:
            raise MeshParseError(f"{path}:{lineno}: {exc}") from None
    return verts, faces


def _parse_off(lines, path):
    body = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            body.append((lineno, line))
    if not body or not body[0][1].startswith("OFF"):
        raise MeshParseError(f"{path}: missing OFF header")
    rest = body[0][1][3:].split()
    pos = 1
    try:
        if not rest:
            rest = body[1][1].split()
            pos = 2
        nv, nf = int(rest[0]), int(rest[1])
        verts = []
        for lineno, line in body[pos : pos + nv]:
            xyz = [float(t) for t in line.split()[:3]]
            if len(xyz) != 3:
                raise MeshParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
            verts.append(xyz)
        faces = []
        for lineno, line in body[pos + nv : pos + nv + nf]:
            tok = [int(t) for t in line.split()]
            n = tok[0]
            if n < 3 or len(tok) < n + 1:
                raise MeshParseError(f"{path}:{lineno}: malformed face record")
            faces.extend(_fan(tok[1 : n + 1]))
    except (IndexError, ValueError) as exc:
        raise MeshParseError(f"{path}: malformed OFF body ({exc})") from None
    if len(verts) != nv or len(faces) < nf:
        raise MeshParseError(f"{path}: expected {nv} vertices / {nf} faces")
    return verts, faces


def load_mesh(path, format=None):
    """Read an OBJ or OFF file into a :class:`SurfaceMesh`.

    Raises ``FileNotFoundError`` for missing files and :class:`MeshError`
    (or its parse subclass) for malformed or non-manifold content.
    """
    fmt = (format or detect_format(path)).lower()
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    parse = _parse_obj if fmt == "obj" else _parse_off
    verts, faces = parse(lines, path)
    return SurfaceMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def _num(x):
    return repr(float(x))


def format_mesh(mesh, format):
    fmt = format.lower()
    out = []
    if fmt == "obj":
        out.extend(f"v {_num(x)} {_num(y)} {_num(z)}" for x, y, z in mesh.vertices)
        out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces)
    elif fmt == "off":
        out.append("OFF")
        out.append(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}")
        out.extend(f"{_num(x)} {_num(y)} {_num(z)}" for x, y, z in mesh.vertices)
        out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces)
    else:
        raise MeshParseError(f"unknown mesh format {format!r}")
    return "\n".join(out) + "\n"


def save_mesh(mesh, path, format=None):
    fmt = format or detect_format(path)
    Path(path).write_text(format_mesh(mesh, fmt), encoding="utf-8")
