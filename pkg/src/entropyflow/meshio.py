"""ASCII OFF and OBJ reading and writing (positions and triangular faces only)."""

from pathlib import Path

import numpy as np

from .errors import MeshError
from .mesh import build_mesh


def _tokens(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def read_off(path):
    lines = list(_tokens(Path(path).read_text()))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshError(f"{path}: missing OFF header")
    head = lines[0][3:].split() or lines.pop(1).split()
    lines = lines[1:]
    nv, nf = int(head[0]), int(head[1])
    verts = np.array([[float(t) for t in lines[i].split()[:3]] for i in range(nv)])
    faces = []
    for line in lines[nv : nv + nf]:
        parts = line.split()
        k = int(parts[0])
        idx = [int(t) for t in parts[1 : 1 + k]]
        if k != 3:
            raise MeshError(f"{path}: only triangular faces are supported", simplex=tuple(idx))
        faces.append(idx)
    return build_mesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3))


def read_obj(path):
    verts, faces = [], []
    for line in _tokens(Path(path).read_text()):
        parts = line.split()
        if parts[0] == "v":
            verts.append([float(t) for t in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(t.split("/")[0]) for t in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            if len(idx) != 3:
                raise MeshError(f"{path}: only triangular faces are supported", simplex=tuple(idx))
            faces.append(idx)
    return build_mesh(np.array(verts, float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_off(mesh, path):
    v, f = mesh.vertices, mesh.faces
    out = [f"OFF\n{len(v)} {len(f)} 0"]
    out += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in v]
    out += [f"3 {a} {b} {c}" for a, b, c in f]
    Path(path).write_text("\n".join(out) + "\n")


def write_obj(mesh, path):
    out = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(out) + "\n")


def read_mesh(path):
    """Read an OFF or OBJ file, chosen by extension."""
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return read_obj(path)
    return read_off(path)


def write_mesh(mesh, path):
    if Path(path).suffix.lower() == ".obj":
        write_obj(mesh, path)
    else:
        write_off(mesh, path)
