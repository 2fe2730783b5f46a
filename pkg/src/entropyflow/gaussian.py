"""Gaussian surface area and entropy.

For a closed surface ``S`` the Gaussian area in the frame ``(y, rho)`` is

    F[rho S + y] = (4 pi)^-1  integral over rho S + y of exp(-|x|^2 / 4)

and the entropy is its supremum over all frames.  Internally a frame is
handled as ``(c, s)`` with ``c = -y / rho`` the point of ``S`` mapped to the
origin and ``s = log rho``; then ``F = rho^2 / (4 pi) int_S exp(-rho^2 |x - c|^2 / 4)``.

Quadrature is per triangle.  A triangle of longest edge ``h`` has rescaled
size ``rho h``; small cells get a low-order collapsed Gauss rule, large cells
the 16-point degree-7 rule, on a uniform subdivision once ``rho h`` exceeds
1.2.  The error estimate is the difference with the next finer plan.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.special import roots_jacobi, roots_legendre

from .errors import InvalidParameter, NoConvergence, QuadratureNotConverged
from .mesh import outward_normals, principal_curvatures

FOUR_PI = 4.0 * np.pi
# exp(-CUTOFF^2 / 4) is far below double precision relative to any F of order one
CUTOFF = 13.0


@dataclass(frozen=True)
class GaussianFrame:
    """The frame ``(y, rho)``: the surface is mapped to ``rho S + y``."""

    y: tuple
    rho: float

    def __post_init__(self):
        y = tuple(float(t) for t in np.asarray(self.y, float).reshape(3))
        if not np.all(np.isfinite(y)):
            raise InvalidParameter("frame translation must be finite")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise InvalidParameter(f"frame scale must be positive, got {self.rho}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def centered_at(cls, center, rho):
        """Frame that sends ``center`` to the origin and scales by ``rho``."""
        return cls(-rho * np.asarray(center, float), rho)

    @property
    def center(self):
        return -np.asarray(self.y) / self.rho


IDENTITY = GaussianFrame((0.0, 0.0, 0.0), 1.0)


# --------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=None)
def _collapsed_rule(n):
    """n*n-point collapsed Gauss rule on the reference triangle, exact to degree 2n-1.

    Returns barycentric points (k, 3) and weights summing to one.
    """
    xj, wj = roots_jacobi(n, 1.0, 0.0)  # weight (1 - x)
    xl, wl = roots_legendre(n)
    s = (1.0 + xj) / 2.0
    t = (1.0 + xl) / 2.0
    ss, tt = np.meshgrid(s, t, indexing="ij")
    ww = np.outer(wj, wl)
    u = ss.ravel()
    v = ((1.0 - ss) * tt).ravel()
    w = ww.ravel()
    return np.c_[1.0 - u - v, u, v], w / w.sum()


@lru_cache(maxsize=None)
def _subdivided_rule(n, m):
    """Rule ``n`` applied on the ``m*m`` uniform subdivision of the triangle."""
    pts, wts = _collapsed_rule(n)
    tris = []
    for i in range(m):
        for j in range(m - i):
            tris.append(((i, j), (i + 1, j), (i, j + 1)))
            if i + j <= m - 2:
                tris.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
    tris = np.array(tris, float) / m  # (m^2, 3 corners, (u, v))
    corners = np.concatenate([1.0 - tris.sum(axis=2, keepdims=True), tris], axis=2)
    bary = np.einsum("kc,tcb->tkb", pts, corners).reshape(-1, 3)
    w = np.tile(wts, len(tris)) / len(tris)
    return np.ascontiguousarray(bary), w


def _plan(size, refine):
    """Rule order and subdivision per face from its rescaled size.

    Each refinement step raises the order by one, or doubles the
    subdivision once the highest order is reached.
    """
    n = np.select([size <= 0.005, size <= 0.12, size <= 0.6], [1, 2, 3], 4)
    m = np.where(n == 4, np.maximum(1, np.ceil(size / 1.2)), 1).astype(np.int64)
    for _ in range(refine):
        top = n == 4
        m = np.where(top, 2 * m, m)
        n = np.where(top, n, n + 1)
    return n, m


class _FaceData:
    """Per-mesh arrays reused by every quadrature call."""

    def __init__(self, mesh):
        self.corners = mesh.corners
        self.areas = mesh.face_areas
        self.centroids = self.corners.mean(axis=1)
        self.radii = np.linalg.norm(self.corners - self.centroids[:, None, :], axis=2).max(axis=1)
        e = self.corners[:, [1, 2, 0]] - self.corners
        self.hmax = np.linalg.norm(e, axis=2).max(axis=1)
        self.max_radius = float(self.radii.max())
        self._tree = None

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.centroids)
        return self._tree

    def near(self, center, reach):
        """Indices of faces that may come within ``reach`` of ``center``."""
        idx = np.asarray(self.tree.query_ball_point(center, reach + self.max_radius), dtype=np.int64)
        idx.sort()
        d = np.linalg.norm(self.centroids[idx] - center, axis=1) - self.radii[idx]
        return idx[d <= reach]

    def nodes(self, faces, size, refine):
        """Quadrature points and area weights for ``faces``."""
        n, m = _plan(size, refine)
        pts, wts = [], []
        for key in sorted(set(zip(n.tolist(), m.tolist()))):
            sel = faces[(n == key[0]) & (m == key[1])]
            bary, w = _subdivided_rule(*key)
            pts.append(np.matmul(bary[None], self.corners[sel]).reshape(-1, 3))
            wts.append((self.areas[sel][:, None] * w[None, :]).ravel())
        if not pts:
            return np.zeros((0, 3)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)


def _face_data(mesh):
    fd = mesh.__dict__.get("_gaussian_face_data")
    if fd is None:
        fd = _FaceData(mesh)
        mesh.__dict__["_gaussian_face_data"] = fd
    return fd


def _restrict(faces, face_mask):
    if face_mask is None:
        return faces
    return faces[np.asarray(face_mask, bool)[faces]]


def _evaluate(mesh, c, rho, refine=0, face_mask=None, gradient=False):
    """F at (c, rho) with a fixed quadrature plan, optionally with (dF/dc, dF/ds)."""
    fd = _face_data(mesh)
    faces = _restrict(fd.near(c, CUTOFF / rho), face_mask)
    x, w = fd.nodes(faces, rho * fd.hmax[faces], refine)
    z = rho * (x - c)
    z2 = np.einsum("ij,ij->i", z, z)
    g = w * np.exp(-z2 / 4.0)
    k = rho * rho / FOUR_PI
    val = k * g.sum()
    if not gradient:
        return val
    d_c = k * rho / 2.0 * (g @ z)
    d_s = 2.0 * val - k / 2.0 * (g @ z2)
    return val, d_c, d_s


def _to_frame_gradient(c, rho, d_c, d_s):
    """Convert (dF/dc, dF/ds) into (dF/dy, dF/drho)."""
    d_y = -d_c / rho
    d_rho = (d_s - d_c @ c) / rho
    return d_y, d_rho


def _frame(frame):
    if isinstance(frame, GaussianFrame):
        return frame
    y, rho = frame
    return GaussianFrame(y, rho)


def gaussian_area(mesh, frame=IDENTITY, *, tol=1e-6, face_mask=None, refine=None, return_error=False):
    """Gaussian area ``F[rho S + y]`` of a closed mesh.

    With ``refine=None`` the quadrature plan is refined until two successive
    plans agree within ``tol``; the finer value is returned.  A fixed integer
    ``refine`` evaluates one plan only (error estimate then ``nan``).
    ``face_mask`` restricts the integral to the selected faces.
    """
    frame = _frame(frame)
    c, rho = frame.center, frame.rho
    if refine is not None:
        val = _evaluate(mesh, c, rho, refine, face_mask)
        return (val, float("nan")) if return_error else val
    prev = _evaluate(mesh, c, rho, 0, face_mask)
    errs = []
    for level in range(1, 7):
        cur = _evaluate(mesh, c, rho, level, face_mask)
        err = abs(cur - prev)
        if err <= tol:
            return (cur, err) if return_error else cur
        if len(errs) >= 2 and err >= errs[-1] >= errs[-2]:
            break
        errs.append(err)
        prev = cur
    raise QuadratureNotConverged(f"quadrature error estimate {err:.3g} above tol {tol:.3g}")


def gaussian_area_gradient(mesh, frame=IDENTITY, *, face_mask=None, refine=1):
    """``(dF/dy, dF/drho)`` by quadrature of the differentiated integrand."""
    frame = _frame(frame)
    c, rho = frame.center, frame.rho
    _, d_c, d_s = _evaluate(mesh, c, rho, refine, face_mask, gradient=True)
    return _to_frame_gradient(c, rho, d_c, d_s)


# --------------------------------------------------------------------------
# search ranges and seeds


def _bbox(mesh, inflate=2.0):
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    return mid - inflate * half, mid + inflate * half


def _curvatures(mesh):
    k = mesh.__dict__.get("_principal_curvatures")
    if k is None:
        k = mesh.__dict__["_principal_curvatures"] = principal_curvatures(mesh)
    return k


def _max_curvature(mesh):
    return float(np.abs(_curvatures(mesh)[:, 0]).max())


def default_rho_range(mesh):
    """Scale range ``[0.05, 20] * 4/diam``, widened to ``4 max|k|`` for thin features."""
    base = 4.0 / mesh.diameter
    return 0.05 * base, max(20.0 * base, 4.0 * _max_curvature(mesh))


def curvature_seeds(mesh, count=4):
    """Frames centred at the curvature centres of the most curved regions."""
    k = _curvatures(mesh)
    kappa = np.abs(k[:, 0])
    normals = outward_normals(mesh)
    threshold = 6.0 / mesh.diameter
    order = np.argsort(-kappa, kind="stable")
    chosen = []
    for i in order:
        if kappa[i] <= threshold or len(chosen) >= count:
            break
        p = mesh.vertices[i]
        if all(np.linalg.norm(p - mesh.vertices[j]) > 3.0 / kappa[j] for j in chosen):
            chosen.append(i)
    seeds = []
    for i in chosen:
        center = mesh.vertices[i] - np.sign(k[i, 0]) * normals[i] / kappa[i]
        seeds += [(center, np.sqrt(2.0) * kappa[i]), (center, 2.0 * kappa[i])]
    return seeds


# --------------------------------------------------------------------------
# entropy


@dataclass
class EntropyResult:
    value: float
    argmax: GaussianFrame
    starts_tried: int
    converged: bool
    gradient_norm: float
    oracle_gap: float = None
    on_boundary: bool = False
    quadrature_error: float = float("nan")
    evaluations: int = 0
    max_probed: float = float("nan")
    starts: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "value": self.value,
            "center": list(self.argmax.y),
            "scale": self.argmax.rho,
            "converged": self.converged,
            "starts_tried": self.starts_tried,
            "gradient_norm": self.gradient_norm,
            "oracle_gap": self.oracle_gap,
            "on_boundary": self.on_boundary,
            "quadrature_error": self.quadrature_error,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _better(a, b):
    """Deterministic order of local maxima: value, then smaller rho, then lexicographic y."""
    if abs(a[0] - b[0]) > 1e-9:
        return a[0] > b[0]
    if abs(a[2] - b[2]) > 1e-9:
        return a[2] < b[2]
    return tuple(a[3]) < tuple(b[3])


def entropy(
    mesh,
    *,
    max_iter=200,
    gtol=1e-7,
    grid_starts=3,
    extra_seeds=(),
    strict=False,
    oracle=False,
    tol=1e-6,
):
    """Entropy by multistart L-BFGS-B over ``(c, log rho)``.

    Starts: the centroid at three scales, curvature-centre seeds of the most
    curved regions, and the best ``grid_starts`` frames of a coarse grid.
    The value is a lower bound for the supremum.
    """
    lo_c, hi_c = _bbox(mesh)
    rho_lo, rho_hi = default_rho_range(mesh)
    bounds = list(zip(lo_c, hi_c)) + [(np.log(rho_lo), np.log(rho_hi))]
    base = 4.0 / mesh.diameter
    seeds = [(mesh.centroid, f * base) for f in (0.5, 1.0, 2.0)]
    seeds += curvature_seeds(mesh)
    if grid_starts:
        seeds += _coarse_grid_seeds(mesh, grid_starts)
    seeds += [(np.asarray(c, float), float(r)) for c, r in extra_seeds]

    counter = {"n": 0, "best": -np.inf}

    def fun(p):
        counter["n"] += 1
        val, d_c, d_s = _evaluate(mesh, p[:3], np.exp(p[3]), 0, gradient=True)
        counter["best"] = max(counter["best"], val)
        return -val, -np.r_[d_c, d_s]

    results = []
    for center, rho in seeds:
        p0 = np.r_[np.clip(center, lo_c, hi_c), np.clip(np.log(rho), *bounds[3])]
        res = minimize(fun, p0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15})
        c, s = res.x[:3], res.x[3]
        grad = np.linalg.norm(res.jac)
        ok = bool(res.success) or grad < 1e-5
        results.append((-res.fun, c, np.exp(s), tuple(-np.exp(s) * c), ok, grad, res.x))
    best = results[0]
    for r in results[1:]:
        if _better(r, best):
            best = r
    value_fixed, c, rho, _, ok, _, x = best
    value, qerr = gaussian_area(mesh, GaussianFrame.centered_at(c, rho), tol=tol, return_error=True)
    d_y, d_rho = gaussian_area_gradient(mesh, GaussianFrame.centered_at(c, rho))
    span = np.array([b[1] - b[0] for b in bounds])
    on_boundary = bool(np.any(np.minimum(x - [b[0] for b in bounds], [b[1] for b in bounds] - x) < 1e-6 * span))
    converged = any(r[4] for r in results)
    result = EntropyResult(
        value=float(value),
        argmax=GaussianFrame.centered_at(c, rho),
        starts_tried=len(seeds),
        converged=converged,
        gradient_norm=float(np.linalg.norm(np.r_[d_y, d_rho])),
        on_boundary=on_boundary,
        quadrature_error=float(qerr),
        evaluations=counter["n"],
        max_probed=float(counter["best"]),
        starts=[(float(r[0]), GaussianFrame.centered_at(r[1], r[2]), r[4]) for r in results],
    )
    if oracle:
        result.oracle_gap = float(result.value - entropy_grid_oracle(mesh))
    if strict and not converged:
        raise NoConvergence("no start converged", result)
    return result


# --------------------------------------------------------------------------
# grid oracle


def _axes(lo, hi, n):
    return [np.linspace(a, b, n) for a, b in zip(lo, hi)]


def _lattice(lo, hi, n):
    return np.stack(np.meshgrid(*_axes(lo, hi, n), indexing="ij"), axis=-1).reshape(-1, 3)


def _batch(mesh, centers, rho, refine=0):
    """F at many centres sharing one scale.

    Centres are bucketed into cells of the cutoff radius; each bucket is
    summed densely against the quadrature nodes within its reach.
    """
    fd = _face_data(mesh)
    reach = CUTOFF / rho
    out = np.zeros(len(centers))
    gap = cKDTree(centers).query(fd.centroids, distance_upper_bound=reach + fd.max_radius)[0]
    faces = np.flatnonzero(np.isfinite(gap))
    if len(faces) == 0:
        return out
    x, w = fd.nodes(faces, rho * fd.hmax[faces], refine)
    k = rho * rho / FOUR_PI
    tree = cKDTree(x)
    keys = np.floor((centers - centers.min(axis=0)) / reach).astype(np.int64)
    _, bucket = np.unique(keys, axis=0, return_inverse=True)
    bucket = bucket.ravel()
    for b in range(bucket.max() + 1):
        members = np.flatnonzero(bucket == b)
        c = centers[members]
        mid = (c.max(axis=0) + c.min(axis=0)) / 2.0
        half = np.linalg.norm(c.max(axis=0) - c.min(axis=0)) / 2.0
        idx = np.asarray(tree.query_ball_point(mid, reach + half, return_sorted=True), dtype=np.int64)
        if len(idx) == 0:
            continue
        xs, ws = x[idx], w[idx]
        x2 = np.einsum("ij,ij->i", xs, xs)
        step = max(1, int(4e6 // len(idx)))
        for s in range(0, len(members), step):
            cc = c[s : s + step]
            d2 = x2[None, :] - 2.0 * cc @ xs.T + np.einsum("ij,ij->i", cc, cc)[:, None]
            out[members[s : s + step]] = k * (np.exp(-rho * rho * np.maximum(d2, 0.0) / 4.0) @ ws)
    return out


def _lattice_batch(mesh, axes, rho, refine=0):
    """F on the tensor lattice ``axes[0] x axes[1] x axes[2]`` at one scale.

    The Gaussian factorizes over coordinates, so the lattice sum is a
    tensor contraction of three small exponential tables.
    """
    fd = _face_data(mesh)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    gap = cKDTree(grid).query(fd.centroids, distance_upper_bound=CUTOFF / rho + fd.max_radius)[0]
    faces = np.flatnonzero(np.isfinite(gap))
    if len(faces) == 0:
        return np.zeros(len(grid))
    x, w = fd.nodes(faces, rho * fd.hmax[faces], refine)
    tables = [np.exp(-rho * rho * (x[:, d][None, :] - axes[d][:, None]) ** 2 / 4.0) for d in range(3)]
    ex, ey, ez = tables
    pair = (ex[:, None, :] * ey[None, :, :]).reshape(-1, len(x))
    vals = pair @ (w[None, :] * ez).T
    return rho * rho / FOUR_PI * vals.reshape(-1)


def anchored_frames(mesh, samples=128, depths=8, ratios=(np.sqrt(2.0), 2.0)):
    """Frames centred at depth ``d`` below sampled vertices with scale ``ratio / d``.

    Returned as a list of ``(rho, centers)`` groups.
    """
    normals = outward_normals(mesh)
    stride = max(1, mesh.n_vertices // samples)
    idx = np.arange(0, mesh.n_vertices, stride)
    kmax = _max_curvature(mesh)
    groups = []
    for d in np.geomspace(0.5 / kmax, 0.5 * mesh.diameter, depths):
        centers = mesh.vertices[idx] - d * normals[idx]
        groups += [(r / d, centers) for r in ratios]
    return groups


def _polish(mesh, c, rho, value, min_step=1e-4):
    """Deterministic compass search in (c, log rho) from a grid point."""
    s = np.log(rho)
    step = 0.25
    while step >= min_step:
        improved = False
        for axis in range(4):
            for sign in (1.0, -1.0):
                dc = np.zeros(3)
                ds = 0.0
                if axis < 3:
                    dc[axis] = sign * step / np.exp(s)
                else:
                    ds = sign * step
                v = _evaluate(mesh, c + dc, np.exp(s + ds))
                if v > value + 1e-13:
                    c, s, value, improved = c + dc, s + ds, v, True
        if not improved:
            step /= 2.0
    return c, np.exp(s), value


def entropy_grid_oracle(
    mesh,
    *,
    centers_per_axis=7,
    n_rho=21,
    bbox=None,
    rho_range=None,
    anchored=True,
    zoom=True,
    zoom_starts=4,
    return_frame=False,
):
    """Maximum of the Gaussian area over a deterministic frame grid.

    Centres form a lattice over the bounding box inflated twice (odd counts
    keep the mid-planes); scales are log-spaced over ``rho_range``.  With
    ``anchored`` the grid also includes frames placed below the surface at
    matched scales, and ``zoom`` polishes the best ``zoom_starts`` separated
    grid frames by compass search.
    Refining ``centers_per_axis`` to ``2n - 1`` and ``n_rho`` to ``2m - 1``
    gives a superset of frames, so without ``zoom`` the value can only grow.
    """
    lo, hi = _bbox(mesh) if bbox is None else (np.asarray(bbox[0], float), np.asarray(bbox[1], float))
    r_lo, r_hi = default_rho_range(mesh) if rho_range is None else rho_range
    axes = _axes(lo, hi, centers_per_axis)
    centers = _lattice(lo, hi, centers_per_axis)
    cands = []
    for rho in np.geomspace(r_lo, r_hi, n_rho):
        vals = _lattice_batch(mesh, axes, rho)
        i = int(np.argmax(vals))
        cands.append((float(vals[i]), centers[i], float(rho)))
    for rho, cs in anchored_frames(mesh) if anchored else []:
        vals = _batch(mesh, cs, rho)
        i = int(np.argmax(vals))
        cands.append((float(vals[i]), cs[i], float(rho)))
    cands.sort(key=lambda t: -t[0])
    value, c, rho = cands[0]
    if zoom:
        # polish the best few well-separated grid frames
        picked = []
        for cand in cands:
            if len(picked) >= zoom_starts:
                break
            if all(np.linalg.norm(cand[1] - p[1]) * min(cand[2], p[2]) > 1.0
                   or abs(np.log(cand[2] / p[2])) > 0.3 for p in picked):
                picked.append(cand)
        for v0, c0, r0 in picked:
            c1, r1, v1 = _polish(mesh, np.asarray(c0, float), r0, v0)
            if v1 > value:
                value, c, rho = v1, c1, r1
    if return_frame:
        return float(value), GaussianFrame.centered_at(c, rho)
    return float(value)


def _coarse_grid_seeds(mesh, count):
    lo, hi = _bbox(mesh)
    r_lo, r_hi = default_rho_range(mesh)
    centers = _lattice(lo, hi, 5)
    cands = []
    for rho in np.geomspace(r_lo, r_hi, 9):
        vals = _lattice_batch(mesh, _axes(lo, hi, 5), rho)
        for i in np.argsort(-vals, kind="stable")[:count]:
            cands.append((float(vals[i]), centers[i], float(rho)))
    cands.sort(key=lambda t: -t[0])
    return [(c, r) for _, c, r in cands[:count]]
