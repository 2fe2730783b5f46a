"""Closed triangle meshes and the discrete differential operators used everywhere.

Conventions
-----------
* Normals point out of the enclosed volume (signed volume > 0).
* The mean curvature vector is the Laplace-Beltrami of the position,
  ``Hvec = Delta x``; on a round sphere of radius R it is ``-(2/R) n``.
* The scalar mean curvature is ``H = -Hvec . n`` (positive on spheres).
"""

from collections import deque
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import (
    DegenerateTriangle,
    Disconnected,
    DuplicateVertex,
    InsufficientNeighborhood,
    NonManifoldEdge,
    NonOrientable,
    NumericalDegeneracy,
    OpenBoundary,
)

DUPLICATE_TOL = 1e-12


# cached attributes that depend on the faces only
_TOPOLOGY = ("edges", "adjacency", "_two_rings")


class TriangleMesh:
    """Validated, immutable closed oriented triangle mesh.

    Construct through :func:`build_mesh`. The vertex and face arrays are
    read-only; derived quantities are computed lazily and cached.
    """

    def __init__(self, vertices, faces):
        self.vertices = vertices
        self.faces = faces
        self.vertices.flags.writeable = False
        self.faces.flags.writeable = False

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def corners(self):
        """(F, 3, 3) array of triangle corner positions."""
        return self.vertices[self.faces]

    @cached_property
    def face_cross(self):
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross, axis=1)

    @cached_property
    def face_normals(self):
        return self.face_cross / (2.0 * self.face_areas[:, None])

    @cached_property
    def area(self):
        return float(self.face_areas.sum())

    @cached_property
    def signed_volume(self):
        c = self.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    @cached_property
    def edges(self):
        """Unique undirected edges as an (E, 2) array with ``e[:, 0] < e[:, 1]``."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def adjacency(self):
        """Symmetric vertex adjacency (one-ring) as a CSR matrix of ones."""
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        a = sparse.coo_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)
        )
        return a.tocsr()

    @cached_property
    def centroid(self):
        """Area-weighted centroid of the surface."""
        c = self.corners.mean(axis=1)
        return (c * self.face_areas[:, None]).sum(axis=0) / self.area

    @cached_property
    def diameter(self):
        """Extent of the vertex set (double-sweep farthest point estimate)."""
        v = self.vertices
        i = int(np.argmax(np.linalg.norm(v - v.mean(axis=0), axis=1)))
        best = 0.0
        for _ in range(4):
            d = np.linalg.norm(v - v[i], axis=1)
            j = int(np.argmax(d))
            if d[j] <= best:
                break
            best, i = float(d[j]), j
        return best

    @cached_property
    def min_angle(self):
        """Smallest interior angle over all triangles, in radians."""
        return float(triangle_angles(self.corners).min())

    def transformed(self, rotation=None, translation=None, scale=1.0):
        """Return ``scale * R x + t`` applied to every vertex (faces kept)."""
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation, float).T
        if translation is not None:
            v = v + np.asarray(translation, float)
        return build_mesh(v, self.faces)

    def with_vertices(self, vertices):
        """Same connectivity, new positions; skips the topology checks."""
        vertices = np.array(vertices, dtype=float)
        if vertices.shape != self.vertices.shape:
            raise ValueError("vertex array shape changed")
        out = TriangleMesh(vertices, self.faces)
        for key in _TOPOLOGY:
            if key in self.__dict__:
                out.__dict__[key] = self.__dict__[key]
        return out


def triangle_angles(corners):
    """Interior angles (F, 3) of triangles given as (F, 3, 3) corners."""
    a = corners
    out = np.empty(a.shape[:2])
    for i in range(3):
        u = a[:, (i + 1) % 3] - a[:, i]
        w = a[:, (i + 2) % 3] - a[:, i]
        cos = np.einsum("ij,ij->i", u, w)
        sin = np.linalg.norm(np.cross(u, w), axis=1)
        out[:, i] = np.arctan2(sin, cos)
    return out


def _orient_faces(faces):
    """Flip faces so every shared edge is traversed in opposite directions."""
    n_faces = len(faces)
    und = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    keys, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    bad = np.flatnonzero(counts == 1)
    if len(bad):
        raise OpenBoundary(f"edge {tuple(keys[bad[0]])} belongs to one face", tuple(keys[bad[0]]))
    bad = np.flatnonzero(counts > 2)
    if len(bad):
        raise NonManifoldEdge(
            f"edge {tuple(keys[bad[0]])} belongs to {counts[bad[0]]} faces", tuple(keys[bad[0]])
        )

    directed = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    # sign +1 if the face traverses the edge from low to high index
    sign = np.where(directed[:, 0] < directed[:, 1], 1, -1)
    order = np.argsort(inverse, kind="stable")
    pair = order.reshape(-1, 2)
    face_of = np.arange(3 * n_faces) // 3
    fa, fb = face_of[pair[:, 0]], face_of[pair[:, 1]]
    same = sign[pair[:, 0]] == sign[pair[:, 1]]
    if not same.any():
        return faces

    # BFS: neighbours sharing an edge must have opposite traversal
    nbrs = [[] for _ in range(n_faces)]
    for a, b, s in zip(fa, fb, same):
        nbrs[a].append((b, s))
        nbrs[b].append((a, s))
    flip = np.full(n_faces, -1, dtype=int)
    for root in range(n_faces):
        if flip[root] >= 0:
            continue
        flip[root] = 0
        queue = deque([root])
        while queue:
            f = queue.popleft()
            for g, s in nbrs[f]:
                want = flip[f] ^ int(s)
                if flip[g] < 0:
                    flip[g] = want
                    queue.append(g)
                elif flip[g] != want:
                    raise NonOrientable(f"faces {f} and {g} cannot be consistently oriented", (f, g))
    faces = faces.copy()
    faces[flip == 1] = faces[flip == 1][:, ::-1]
    return faces


def build_mesh(vertices, faces, *, orient=True):
    """Validate raw arrays and return a :class:`TriangleMesh`.

    Checks closedness, manifoldness, orientability, non-degeneracy,
    duplicate vertices and connectivity. Faces are re-oriented so that
    normals point away from the enclosed volume.
    """
    v = np.array(vertices, dtype=float)
    f = np.array(faces, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ValueError("vertices must have shape (n, 3)")
    if f.ndim != 2 or f.shape[1] != 3:
        raise ValueError("faces must have shape (m, 3)")
    if not np.all(np.isfinite(v)):
        raise ValueError("vertices must be finite")
    if f.min() < 0 or f.max() >= len(v):
        raise ValueError("face index out of range")

    diam = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
    rep = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
    area2 = np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    bad = np.flatnonzero(rep | (area2 <= 1e-14 * diam**2))
    if len(bad):
        raise DegenerateTriangle(f"face {bad[0]} has zero area", int(bad[0]))

    pairs = cKDTree(v).query_pairs(DUPLICATE_TOL * diam, output_type="ndarray")
    if len(pairs):
        raise DuplicateVertex(f"vertices {tuple(pairs[0])} coincide", tuple(int(i) for i in pairs[0]))

    used = np.zeros(len(v), bool)
    used[f.ravel()] = True
    if not used.all():
        i = int(np.flatnonzero(~used)[0])
        raise Disconnected(f"vertex {i} is not referenced by any face", i)

    e = f[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    graph = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(len(v), len(v)))
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp > 1:
        i = int(np.flatnonzero(labels != labels[0])[0])
        raise Disconnected(f"mesh has {n_comp} components; vertex {i} is not connected to vertex 0", i)

    if orient:
        f = _orient_faces(f)
    mesh = TriangleMesh(v, f)
    if orient and mesh.signed_volume < 0:
        mesh = TriangleMesh(v, f[:, ::-1].copy())
    return mesh


def cotangent_laplacian(mesh):
    """Cotangent stiffness ``L`` with ``L_ij = (cot a + cot b) / 2`` and zero row sums.

    ``L`` is symmetric negative semi-definite; ``(L x)_i / A_i`` is the
    Laplace-Beltrami of ``x`` at vertex ``i`` with mixed area ``A_i``.
    """
    c = mesh.corners
    f = mesh.faces
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    dbl_area = 2.0 * mesh.face_areas
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        u = c[:, i] - c[:, k]
        w = c[:, j] - c[:, k]
        cot = np.einsum("ij,ij->i", u, w) / dbl_area
        rows.append(f[:, i])
        cols.append(f[:, j])
        vals.append(0.5 * cot)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off = off + off.T
    return (off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()


def mixed_areas(mesh):
    """Mixed Voronoi/barycentric vertex areas (sum to the total area)."""
    c = mesh.corners
    f = mesh.faces
    ang = triangle_angles(c)
    area = mesh.face_areas
    out = np.zeros(mesh.n_vertices)
    obtuse = ang > np.pi / 2
    any_obtuse = obtuse.any(axis=1)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        eki = np.sum((c[:, i] - c[:, k]) ** 2, axis=1)
        ekj = np.sum((c[:, j] - c[:, k]) ** 2, axis=1)
        vor = (eki / np.tan(ang[:, j]) + ekj / np.tan(ang[:, i])) / 8.0
        contrib = np.where(any_obtuse, np.where(obtuse[:, k], area / 2.0, area / 4.0), vor)
        np.add.at(out, f[:, k], contrib)
    return out


def outward_normals(mesh):
    """Unit vertex normals pointing out of the enclosed volume.

    Uses Max's weights (face normal scaled by ``1/(|e1|^2 |e2|^2)``),
    which are exact for vertices sampled from a sphere.
    """
    c = mesh.corners
    acc = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        u = c[:, (k + 1) % 3] - c[:, k]
        w = c[:, (k + 2) % 3] - c[:, k]
        wn = np.cross(u, w) / (np.sum(u * u, axis=1) * np.sum(w * w, axis=1))[:, None]
        np.add.at(acc, mesh.faces[:, k], wn)
    return acc / np.linalg.norm(acc, axis=1)[:, None]


def mean_curvature_vector(mesh):
    """Per-vertex mean curvature vector ``Delta_Sigma x`` (cotangent formula)."""
    areas = mixed_areas(mesh)
    tiny = 1e-300 + 1e-14 * mesh.area / mesh.n_vertices
    if np.any(areas <= tiny):
        i = int(np.argmin(areas))
        raise NumericalDegeneracy(f"mixed area underflows at vertex {i}")
    return (cotangent_laplacian(mesh) @ mesh.vertices) / areas[:, None]


def mean_curvature(mesh):
    """Scalar mean curvature ``H = -Hvec . n`` (2/R on a sphere of radius R)."""
    return -np.einsum("ij,ij->i", mean_curvature_vector(mesh), outward_normals(mesh))


def _two_rings(mesh):
    cached = mesh.__dict__.get("_two_rings")
    if cached is None:
        cached = mesh.__dict__["_two_rings"] = _build_two_rings(mesh)
    return cached


def _build_two_rings(mesh):
    a = mesh.adjacency
    a2 = (a @ a + a).tocsr()
    a2.setdiag(0)
    a2.eliminate_zeros()
    counts = np.diff(a2.indptr)
    return a2.indptr, a2.indices, counts


def principal_curvatures(mesh, normals=None):
    """Principal curvatures (n, 2) from a quadratic fit over each two-ring.

    Every two-ring neighbour ``p`` of vertex ``x`` gives a normal-curvature
    sample ``2 (x - p).n / |p - x|^2`` (the circle through ``p`` tangent at
    ``x``) in the tangent direction of ``p - x``.  A least-squares fit of the
    quadratic form ``A c^2 + 2B cs + C s^2`` plus a ``1/|p - x|`` tilt term,
    which absorbs small normal errors, yields the shape operator.  The fit is
    exact on spheres and has no fourth-order bias on cylinders.

    Signs follow the outward normal: convex shapes have positive curvatures.
    Returned sorted so that ``|k[:, 0]| >= |k[:, 1]|``.
    """
    if normals is None:
        normals = outward_normals(mesh)
    indptr, indices, counts = _two_rings(mesh)
    if counts.min() < 6:
        i = int(np.argmin(counts))
        raise InsufficientNeighborhood(f"two-ring of vertex {i} has {counts[i]} vertices")
    n = mesh.n_vertices
    kmax = int(counts.max())
    idx = np.zeros((n, kmax), dtype=np.int64)
    mask = np.arange(kmax)[None, :] < counts[:, None]
    idx[mask] = indices
    rel = mesh.vertices[idx] - mesh.vertices[:, None, :]

    nrm = normals
    helper = np.where(np.abs(nrm[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(nrm, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(nrm, e1)
    u = np.einsum("nkj,nj->nk", rel, e1)
    v = np.einsum("nkj,nj->nk", rel, e2)
    w = -np.einsum("nkj,nj->nk", rel, nrm)  # inward, so convex -> positive
    d2 = np.where(mask, u * u + v * v + w * w, 1.0)
    t = np.sqrt(np.where(mask, u * u + v * v, 1.0))
    c, s = u / t, v / t
    dist = np.sqrt(d2)
    kn = 2.0 * w / d2
    design = np.stack([c * c, 2.0 * c * s, s * s, c / dist, s / dist], axis=-1)
    design = design * mask[..., None]
    ata = np.einsum("nki,nkj->nij", design, design)
    atb = np.einsum("nki,nk->ni", design, kn * mask)
    coef = np.linalg.solve(ata, atb[..., None])[..., 0]
    A, B, C = coef[:, 0], coef[:, 1], coef[:, 2]
    tr = A + C
    disc = np.sqrt(np.maximum(tr * tr / 4.0 - (A * C - B * B), 0.0))
    k = np.stack([tr / 2.0 + disc, tr / 2.0 - disc], axis=1)
    order = np.argsort(-np.abs(k), axis=1)
    return np.take_along_axis(k, order, axis=1)


def second_fundamental_norm(mesh, normals=None):
    """Per-vertex ``|A| = sqrt(k1^2 + k2^2)`` from the quadric fit."""
    k = principal_curvatures(mesh, normals)
    return np.sqrt((k**2).sum(axis=1))
