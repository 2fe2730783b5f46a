"""Closed planar curves and the classical Bonnesen inequality.

    pi^2 (R_out - R_in)^2 <= L^2 - 4 pi A

with ``L`` the length, ``A`` the enclosed area, ``R_out`` the radius of
the smallest enclosing circle and ``R_in`` the radius of the largest
inscribed circle.  Curves are polygons through their samples.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParameter, NotSimple


@dataclass(frozen=True)
class PlanarCurve:
    """Closed polygon through ``points`` (n, 2); the closing edge is implicit.

    Points are stored counter-clockwise whatever the input orientation.
    """

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
            raise InvalidParameter("a curve needs at least 3 points in the plane")
        if not np.all(np.isfinite(p)):
            raise InvalidParameter("non-finite curve coordinates")
        if np.allclose(p[0], p[-1]):
            p = p[:-1]
        if _shoelace(p) < 0:
            p = p[::-1].copy()
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    @classmethod
    def circle(cls, radius=1.0, n=2048, center=(0.0, 0.0)):
        th = 2.0 * np.pi * np.arange(n) / n
        return cls(np.c_[np.cos(th), np.sin(th)] * radius + np.asarray(center, float))

    @classmethod
    def ellipse(cls, a=2.0, b=1.0, n=2048):
        th = 2.0 * np.pi * np.arange(n) / n
        return cls(np.c_[a * np.cos(th), b * np.sin(th)])

    @classmethod
    def square(cls, side=2.0, per_side=64):
        u = np.linspace(-1.0, 1.0, per_side + 1)[:-1]
        one = np.ones_like(u)
        pts = np.vstack([np.c_[u, -one], np.c_[one, u], np.c_[-u, one], np.c_[-one, -u]])
        return cls(0.5 * side * pts)

    @classmethod
    def from_csv(cls, path):
        """Two columns ``x, y`` per row; a non-numeric first row is a header."""
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError:
            data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
        if data.shape[1] != 2:
            raise InvalidParameter(f"expected 2 columns, found {data.shape[1]}")
        return cls(data)

    def scaled(self, s):
        return PlanarCurve(self.points * s)

    @property
    def edges(self):
        return np.roll(self.points, -1, axis=0) - self.points


def _shoelace(p):
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


# --------------------------------------------------------------------------
# simplicity


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def check_simple(curve, chunk=256):
    """Raise :class:`NotSimple` if two non-adjacent edges touch or cross."""
    p = curve.points
    n = len(p)
    a, d = p, curve.edges
    for s in range(0, n, chunk):
        i = np.arange(s, min(s + chunk, n))[:, None]
        j = np.arange(n)[None, :]
        # each unordered pair once, skipping neighbours (including the wrap-around pair)
        mask = (j > i + 1) & ~((i == 0) & (j == n - 1))
        if not mask.any():
            continue
        ai, di = a[i], d[i]
        aj, dj = a[j], d[j]
        den = _cross(di, dj)
        w = aj - ai
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross(w, dj) / den
            u = _cross(w, di) / den
        hit = (den != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        # collinear overlapping edges
        col = (den == 0) & (_cross(w, di) == 0)
        if col.any():
            proj = lambda q: np.einsum("...k,...k->...", q - ai, di)  # noqa: E731
            l2 = np.einsum("...k,...k->...", di, di)
            lo = np.minimum(proj(aj), proj(aj + dj))
            hi = np.maximum(proj(aj), proj(aj + dj))
            hit |= col & (hi >= 0) & (lo <= l2)
        hit &= mask
        if hit.any():
            k, m = np.argwhere(hit)[0]
            raise NotSimple(f"edges {s + k} and {m} intersect")


# --------------------------------------------------------------------------
# circles


def minimum_enclosing_circle(points, seed=0):
    """Smallest enclosing circle ``(center, radius)`` by Welzl's randomized incremental algorithm."""
    p = np.asarray(points, float)
    p = p[np.random.default_rng(seed).permutation(len(p))]
    tol = 1e-12 * (1.0 + np.abs(p).max())
    c, r = p[0], 0.0
    for i in range(1, len(p)):
        if np.hypot(*(p[i] - c)) <= r + tol:
            continue
        c, r = p[i], 0.0
        for j in range(i):
            if np.hypot(*(p[j] - c)) <= r + tol:
                continue
            c, r = 0.5 * (p[i] + p[j]), 0.5 * float(np.hypot(*(p[i] - p[j])))
            for k in range(j):
                if np.hypot(*(p[k] - c)) <= r + tol:
                    continue
                c, r = _circumcircle(p[i], p[j], p[k])
    return np.asarray(c, float), float(r)


def _circumcircle(a, b, c):
    d = 2.0 * _cross(b - a, c - a)
    if d == 0:
        # collinear: the two farthest points span the circle
        pairs = [(a, b), (a, c), (b, c)]
        u, v = max(pairs, key=lambda q: np.hypot(*(q[0] - q[1])))
        return 0.5 * (u + v), 0.5 * float(np.hypot(*(u - v)))
    b2, c2 = b - a, c - a
    ux = (c2[1] * (b2 @ b2) - b2[1] * (c2 @ c2)) / d
    uy = (b2[0] * (c2 @ c2) - c2[0] * (b2 @ b2)) / d
    center = a + np.array([ux, uy])
    return center, float(np.hypot(ux, uy))


def _inside(curve, q):
    """Even-odd point-in-polygon test for points ``q`` (m, 2)."""
    p = curve.points
    x0, y0 = p[:, 0], p[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    qx, qy = q[:, 0:1], q[:, 1:2]
    straddle = (y0 > qy) != (y1 > qy)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (qy - y0) * (x1 - x0) / (y1 - y0)
    return (np.count_nonzero(straddle & (qx < xc), axis=1) % 2) == 1


def boundary_distance(curve, q, chunk=1024):
    """Distance from points ``q`` (m, 2) to the polygon."""
    q = np.atleast_2d(np.asarray(q, float))
    a, d = curve.points, curve.edges
    l2 = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(q))
    for s in range(0, len(q), chunk):
        w = q[s : s + chunk, None, :] - a[None, :, :]
        t = np.clip(np.einsum("mnk,nk->mn", w, d) / l2, 0.0, 1.0)
        out[s : s + chunk] = np.linalg.norm(w - t[..., None] * d, axis=2).min(axis=1)
    return out


def maximum_inscribed_circle(curve, grid=64, polish=4):
    """Largest inscribed circle ``(center, radius)``: interior grid, then Nelder-Mead polish."""
    p = curve.points
    lo, hi = p.min(axis=0), p.max(axis=0)
    gx = np.linspace(lo[0], hi[0], grid + 2)[1:-1]
    gy = np.linspace(lo[1], hi[1], grid + 2)[1:-1]
    q = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    q = q[_inside(curve, q)]
    if len(q) == 0:
        q = p.mean(axis=0)[None, :]
    dist = boundary_distance(curve, q)
    order = np.argsort(-dist)[:polish]

    def neg(z):
        z = z[None, :]
        return -boundary_distance(curve, z)[0] if _inside(curve, z)[0] else 0.0

    best_c, best_r = q[order[0]], float(dist[order[0]])
    step = float(np.max(hi - lo)) / grid
    for i in order:
        res = minimize(neg, q[i], method="Nelder-Mead",
                       options={"xatol": 1e-10 * step, "fatol": 1e-14, "maxiter": 2000,
                                "initial_simplex": q[i] + step * np.array([[0, 0], [1, 0], [0, 1]])})
        if -res.fun > best_r:
            best_c, best_r = res.x, float(-res.fun)
    return np.asarray(best_c, float), best_r


# --------------------------------------------------------------------------
# quantities and the inequality


@dataclass(frozen=True)
class CurveQuantities:
    length: float
    area: float
    inradius: float
    circumradius: float
    incenter: tuple = (0.0, 0.0)
    circumcenter: tuple = (0.0, 0.0)

    @property
    def isoperimetric_defect(self):
        return self.length**2 - 4.0 * np.pi * self.area

    def to_dict(self):
        return {"length": self.length, "area": self.area, "inradius": self.inradius,
                "circumradius": self.circumradius, "isoperimetric_defect": self.isoperimetric_defect}


def curve_quantities(curve, *, check=True):
    """Length, enclosed area, inradius and circumradius of a simple closed polygon."""
    if check:
        check_simple(curve)
    length = float(np.linalg.norm(curve.edges, axis=1).sum())
    area = _shoelace(curve.points)
    cc, r_out = minimum_enclosing_circle(curve.points)
    ic, r_in = maximum_inscribed_circle(curve)
    return CurveQuantities(length, area, r_in, r_out, tuple(map(float, ic)), tuple(map(float, cc)))


@dataclass(frozen=True)
class BonnesenResult:
    lhs: float
    rhs: float
    holds: bool
    quantities: CurveQuantities

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, **self.quantities.to_dict()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def bonnesen_check(curve, *, tol=1e-9):
    """``lhs = pi^2 (R_out - R_in)^2``, ``rhs = L^2 - 4 pi A`` and whether ``lhs <= rhs + tol * L^2``."""
    q = curve_quantities(curve)
    lhs = np.pi**2 * (q.circumradius - q.inradius) ** 2
    rhs = q.isoperimetric_defect
    return BonnesenResult(float(lhs), float(rhs), bool(lhs <= rhs + tol * q.length**2), q)
