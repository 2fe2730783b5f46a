"""Hausdorff distances, round-sphere fits and rigidity defects.

Distances from points to a mesh are exact point-to-triangle distances; the
candidate triangles come from a KD-tree over triangle centroids.  A surface
is represented by sample points on a uniform barycentric grid over every
triangle, so the one-sided distance from a surface is bracketed between the
sampled maximum and the sampled maximum plus the covering radius of the
samples.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .gaussian import entropy

LAMBDA_2 = 4.0 / np.e


# --------------------------------------------------------------------------
# point-to-mesh distance


def point_triangle_distance(p, a, b, c):
    """Exact distances from points ``p`` (k, 3) to triangles ``(a, b, c)`` (k, 3) each."""
    ab, ac = b - a, c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    ap = p - a
    # barycentric coordinates of the projection
    d00 = np.einsum("ij,ij->i", ab, ab)
    d01 = np.einsum("ij,ij->i", ab, ac)
    d11 = np.einsum("ij,ij->i", ac, ac)
    d20 = np.einsum("ij,ij->i", ap, ab)
    d21 = np.einsum("ij,ij->i", ap, ac)
    v = (d11 * d20 - d01 * d21) / nn
    w = (d00 * d21 - d01 * d20) / nn
    inside = (v >= 0) & (w >= 0) & (v + w <= 1)
    plane = np.abs(np.einsum("ij,ij->i", ap, n)) / np.sqrt(nn)
    edge = np.minimum(
        np.minimum(_segment_distance(p, a, b), _segment_distance(p, b, c)),
        _segment_distance(p, c, a),
    )
    return np.where(inside, plane, edge)


def _segment_distance(p, a, b):
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * d), axis=1)


class MeshDistance:
    """Bracketed unsigned distance from points to a fixed triangle mesh.

    For a query point the ``k`` nearest vertices are found with a KD-tree
    and the exact distance to their incident triangles is an upper bound.
    Every other triangle has all corners at least ``d_k`` away, where
    ``d_k`` is the k-th vertex distance, so its distance is at least
    ``d_k - cover`` with ``cover`` the largest corner covering radius.
    """

    def __init__(self, mesh, k=4):
        self.mesh = mesh
        self.corners = mesh.corners
        self.cover = float(_covering_radius(self.corners).max())
        self.k = min(k, mesh.n_vertices)
        self.tree = _tree(mesh.vertices)
        faces = mesh.faces
        order = np.argsort(faces.ravel(), kind="stable")
        owner = faces.ravel()[order]
        counts = np.bincount(owner, minlength=mesh.n_vertices)
        start = np.r_[0, np.cumsum(counts)[:-1]]
        slot = np.arange(len(owner)) - start[owner]
        self.incident = np.full((mesh.n_vertices, counts.max()), -1, dtype=np.int64)
        self.incident[owner, slot] = order // 3
        # tie-free centroid tree for the exact single-point query
        self.centroids = self.corners.mean(axis=1)
        self.radii = np.linalg.norm(self.corners - self.centroids[:, None, :], axis=2).max(axis=1)
        self.ctree = cKDTree(self.centroids)

    def bracket(self, points, chunk=8192):
        """``(upper, lower)`` bounds on the distance of each point to the mesh."""
        points = np.atleast_2d(np.asarray(points, float))
        up = np.empty(len(points))
        lo = np.empty(len(points))
        for s in range(0, len(points), chunk):
            up[s : s + chunk], lo[s : s + chunk] = self._bracket(points[s : s + chunk])
        return up, lo

    def _bracket(self, p):
        dk, idx = self.tree.query(p, k=self.k)
        dk, idx = dk.reshape(len(p), -1), idx.reshape(len(p), -1)
        cand = self.incident[idx].reshape(len(p), -1)
        valid = cand >= 0
        owner = np.broadcast_to(np.arange(len(p))[:, None], cand.shape)[valid]
        f = cand[valid]
        c = self.corners
        d = point_triangle_distance(p[owner], c[f, 0], c[f, 1], c[f, 2])
        up = np.full(len(p), np.inf)
        np.minimum.at(up, owner, d)
        if self.k == self.mesh.n_vertices:
            return up, up.copy()
        return up, np.minimum(up, dk[:, -1] - self.cover)

    def __call__(self, points):
        return self.bracket(points)[0]

    def exact(self, point):
        """Exact distance from a single point, by pruning bounding spheres."""
        p = np.asarray(point, float)
        c = self.corners
        upper = float(self.bracket(p[None, :])[0][0])
        faces = np.asarray(self.ctree.query_ball_point(p, upper + self.radii.max() + 1e-12), dtype=np.int64)
        faces = faces[np.linalg.norm(self.centroids[faces] - p, axis=1) - self.radii[faces] <= upper]
        if faces.size == 0:
            return upper
        q = np.broadcast_to(p, (faces.size, 3))
        return float(min(upper, point_triangle_distance(q, c[faces, 0], c[faces, 1], c[faces, 2]).min()))


def _tree(points):
    # Median-balanced trees are an order of magnitude slower on the regular
    # grids of surface samples queried from far away.
    return cKDTree(points, balanced_tree=False, compact_nodes=False)


def _distance(mesh):
    d = mesh.__dict__.get("_mesh_distance")
    if d is None:
        d = mesh.__dict__["_mesh_distance"] = MeshDistance(mesh)
    return d


# --------------------------------------------------------------------------
# surface samples


def _covering_radius(corners):
    """Largest distance from a point of each triangle to its nearest corner."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    circum = la * lb * lc / (2.0 * area2)
    longest = np.maximum(np.maximum(la, lb), lc)
    sq = np.sort(np.c_[la, lb, lc] ** 2, axis=1)
    obtuse = sq[:, 2] > sq[:, 0] + sq[:, 1]
    return np.where(obtuse, longest / 2.0, circum)


def surface_samples(mesh, spacing=None):
    """Points on a barycentric grid over every triangle and their covering radius.

    Each triangle is split into ``k^2`` similar pieces with ``k`` the
    smallest integer that brings the covering radius to at most
    ``spacing / 2``; the default spacing is half the mean edge length.
    """
    if spacing is None:
        spacing = 0.5 * float(mesh.edge_lengths.mean())
    corners = mesh.corners
    rad = _covering_radius(corners)
    m = np.maximum(1, np.ceil(2.0 * rad / spacing * (1 - 1e-12))).astype(np.int64)
    pts = [mesh.vertices]
    cover = np.zeros(len(m))
    for k in np.unique(m):
        sel = np.flatnonzero(m == k)
        cover[sel] = rad[sel] / k
        if k == 1:
            continue
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        ok = i + j <= k
        bary = np.c_[k - i[ok] - j[ok], i[ok], j[ok]] / k
        interior = ~np.any(bary == 1.0, axis=1)  # corners are already included
        pts.append(np.einsum("kb,fbd->fkd", bary[interior], corners[sel]).reshape(-1, 3))
    return np.concatenate(pts), float(cover.max())


def hausdorff_distance(mesh_a, mesh_b, *, spacing=None, return_parts=False):
    """Symmetric Hausdorff distance between two surfaces as ``(value, error_bound)``.

    Each surface is sampled (half its mean edge length by default) and the
    samples are measured against the other mesh.  The true distance lies
    within ``error_bound`` of ``value``, which never exceeds half the
    sampling spacing.
    """
    if mesh_a is mesh_b or (
        mesh_a.vertices.shape == mesh_b.vertices.shape
        and mesh_a.faces.shape == mesh_b.faces.shape
        and np.array_equal(mesh_a.vertices, mesh_b.vertices)
        and np.array_equal(mesh_a.faces, mesh_b.faces)
    ):
        return (0.0, 0.0, (0.0, 0.0)) if return_parts else (0.0, 0.0)
    pa, ca = surface_samples(mesh_a, spacing)
    pb, cb = surface_samples(mesh_b, spacing)
    ab, lab = _directed(pa, mesh_b)
    ba, lba = _directed(pb, mesh_a)
    value = max(ab, ba)
    bound = max(value - max(lab, lba), max(ab + ca, ba + cb) - value)
    if return_parts:
        return value, bound, (ab, ba)
    return value, bound


def _directed(samples, mesh):
    """Largest sample distance to ``mesh``, with the exact distance of the arg-max as a lower bound."""
    dist = _distance(mesh)
    up = dist(samples)
    i = int(np.argmax(up))
    return float(up[i]), dist.exact(samples[i])


# --------------------------------------------------------------------------
# sphere fits


def fibonacci_sphere(n):
    """``n`` nearly uniform unit vectors."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5.0**0.5) * i
    s = np.sqrt(1.0 - z * z)
    return np.c_[s * np.cos(phi), s * np.sin(phi), z]


def hausdorff_to_sphere(mesh, center, radius, *, sphere_samples=4000):
    """Hausdorff distance between the mesh and the round sphere ``radius S^2 + center``.

    The mesh-to-sphere part is exact: the distance to the sphere is largest
    either at a vertex (outside) or at the mesh point nearest the centre
    (inside).  The sphere-to-mesh part measures Fibonacci points on the
    sphere against the mesh.
    """
    center = np.asarray(center, float)
    dist = _distance(mesh)
    outside = float(np.linalg.norm(mesh.vertices - center, axis=1).max() - radius)
    inside = float(radius - dist.exact(center))
    to_mesh = float(dist(center + radius * fibonacci_sphere(sphere_samples)).max())
    return max(outside, inside, to_mesh)


@dataclass
class SphereFit:
    center: np.ndarray
    radius: float
    defect: float
    boundary_hit: bool = False

    @property
    def normalized_defect(self):
        return self.defect / self.radius

    def to_dict(self):
        return {"center": [float(t) for t in self.center], "radius": self.radius,
                "defect": self.defect, "normalized_defect": self.normalized_defect}


def minimum_enclosing_ball(points, iterations=2000):
    """Approximate smallest enclosing ball (core-set iteration), ``(center, radius)``."""
    c = points.mean(axis=0)
    for k in range(1, iterations + 1):
        far = points[np.argmax(np.linalg.norm(points - c, axis=1))]
        c = c + (far - c) / (k + 1)
    return c, float(np.linalg.norm(points - c, axis=1).max())


def _grid_seeds(mesh, count, per_axis=5):
    """Best ``count`` centres of a bounding-box grid, each with its midrange radius."""
    if count <= 0:
        return []
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    axes = [np.linspace(a, b, per_axis + 2)[1:-1] for a, b in zip(lo, hi)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    outer = np.linalg.norm(mesh.vertices[None, :, :] - centers[:, None, :], axis=2).max(axis=1)
    inner = _distance(mesh)(centers)
    radius = 0.5 * (outer + inner)
    score = [hausdorff_to_sphere(mesh, c, r, sphere_samples=200) / r for c, r in zip(centers, radius)]
    best = np.argsort(score)[:count]
    return [(centers[i], float(radius[i])) for i in best]


def best_sphere_fit(mesh, *, sphere_samples=4000, search_samples=800, grid_seeds=2,
                    descent_starts=3):
    """Round sphere minimizing the normalized Hausdorff defect.

    Seeds: the centroid and the centre of the smallest enclosing ball, each
    with the mean vertex distance and the midrange radius, plus the best
    points of a coarse grid over the bounding box.  The best
    ``descent_starts`` seeds are polished by coordinate descent and the
    winner by Nelder-Mead, all over ``(center, log radius)`` with a coarse
    sphere sampling; the result is re-evaluated with ``sphere_samples``.
    """
    v = mesh.vertices
    seeds = []
    for c in (mesh.centroid, minimum_enclosing_ball(v)[0]):
        r = np.linalg.norm(v - c, axis=1)
        # mean radius, and the midrange that balances the inner and outer parts
        seeds += [(c, float(r.mean())), (c, 0.5 * float(r.max() + _distance(mesh).exact(c)))]
    seeds += _grid_seeds(mesh, grid_seeds)
    scale = mesh.diameter

    def objective(p, samples=search_samples):
        r = np.exp(p[3])
        return hausdorff_to_sphere(mesh, p[:3], r, sphere_samples=samples) / r

    starts = sorted((objective(np.r_[c, np.log(r)]), i) for i, (c, r) in enumerate(seeds))
    best = None
    for val, i in starts[:descent_starts]:
        c, r = seeds[i]
        p = np.r_[c, np.log(r)]
        step = np.array([0.1 * scale] * 3 + [0.2])
        while step[3] >= 1e-3:
            improved = False
            for axis in range(4):
                for sgn in (1.0, -1.0):
                    q = p.copy()
                    q[axis] += sgn * step[axis]
                    fq = objective(q)
                    if fq < val:
                        p, val, improved = q, fq, True
            if not improved:
                step /= 2.0
        if best is None or val < best[1]:
            best = (p, val)
    res = minimize(objective, best[0], method="Nelder-Mead",
                   options={"xatol": 1e-6 * scale, "fatol": 1e-7, "maxiter": 300})
    if res.fun < best[1]:
        best = (res.x, res.fun)
    p = best[0]
    r = float(np.exp(p[3]))
    defect = hausdorff_to_sphere(mesh, p[:3], r, sphere_samples=sphere_samples)
    return SphereFit(np.array(p[:3]), r, float(defect))


# --------------------------------------------------------------------------
# rigidity


@dataclass
class RigidityReport:
    delta: float
    distance: float
    ratio: float
    fit: SphereFit
    entropy_value: float
    delta_floor: float
    floored: bool
    reference: float
    uncertainty: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "delta": self.delta,
            "distance": self.distance,
            "ratio": self.ratio,
            "fit": {"center": [float(t) for t in self.fit.center], "radius": self.fit.radius},
            "entropy": self.entropy_value,
            "reference": self.reference,
            "floors": {"delta_floor": self.delta_floor, "at_floor": self.floored},
            "uncertainties": {"delta": self.uncertainty},
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def rigidity_defect(mesh, *, entropy_result=None, reference=LAMBDA_2, delta_floor=1e-6, fit=None,
                    oracle=False):
    """Entropy defect ``delta = lambda - reference`` and normalized distance to the best sphere.

    ``ratio = d / max(delta, delta_floor)^(1/8)``.  The uncertainty on delta
    is the quadrature error estimate plus, with ``oracle``, the absolute gap
    to the grid oracle.
    """
    res = entropy_result if entropy_result is not None else entropy(mesh, oracle=oracle)
    fit = best_sphere_fit(mesh) if fit is None else fit
    delta = res.value - reference
    floored = delta < delta_floor
    d = fit.normalized_defect
    unc = res.quadrature_error if np.isfinite(res.quadrature_error) else 0.0
    if res.oracle_gap is not None:
        unc += abs(min(res.oracle_gap, 0.0))
    ratio = d / max(delta, delta_floor) ** 0.125
    return RigidityReport(float(delta), float(d), float(ratio), fit, float(res.value), delta_floor,
                          bool(floored), float(reference), float(unc))


def log_log_slope(deltas, distances):
    """Least-squares slope of log d against log delta over rows with both positive."""
    x, y = np.asarray(deltas, float), np.asarray(distances, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# --------------------------------------------------------------------------
# Gaussian-weighted dissipation along a rescaled flow


def monotonicity_defect(rescaled, t_a=-1.0, t_b=-0.5):
    """Integral over ``[t_a, t_b]`` of the Gaussian-weighted shrinker defect.

    For each state of the rescaled flow with time ``t < 0`` the spatial
    integrand is ``|H + x.n / (2t)|^2 (-4 pi t)^-1 exp(|x|^2 / (4t))`` summed
    with mixed vertex areas; the time integral is the trapezoid rule over
    the states inside the interval.
    """
    from .mesh import mean_curvature, mixed_areas, outward_normals

    times, vals = [], []
    for st in rescaled.states:
        t = st.t
        if t < t_a - 1e-12 or t > t_b + 1e-12 or t >= 0:
            continue
        m = st.surface
        x = m.vertices
        n = outward_normals(m)
        h = mean_curvature(m)
        xn = np.einsum("ij,ij->i", x, n)
        w = np.exp(np.einsum("ij,ij->i", x, x) / (4.0 * t)) / (-4.0 * np.pi * t)
        vals.append(float((mixed_areas(m) * (h + xn / (2.0 * t)) ** 2 * w).sum()))
        times.append(t)
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(vals, times))
