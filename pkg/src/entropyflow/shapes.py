"""Parametric closed surfaces.

Star-shaped surfaces (sphere, ellipsoid, perturbed sphere) are built by
mapping an icosphere; surfaces of revolution about the x-axis (capped
cylinder, dumbbell, spiked sphere, torus) are built ring by ring from a
generating profile with curvature-adapted spacing.

A refinement level ``L`` targets edges of about ``diameter * 2**-L``;
curved regions are refined further so that a circle of curvature radius
``R`` gets ``8 * 2**(L-3)`` segments (at least 12).
"""

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre

from .errors import InvalidParameter
from .mesh import build_mesh

# --------------------------------------------------------------------------
# icosphere


def icosphere(level):
    """Unit icosphere after ``level`` midpoint subdivisions."""
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    for _ in range(level):
        e = np.sort(f[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        m = (inv.ravel() + len(v)).reshape(-1, 3)
        v = np.vstack([v, mid])
        a, b, c = f.T
        ab, bc, ca = m.T
        f = np.concatenate(
            [np.c_[a, ab, ca], np.c_[ab, b, bc], np.c_[ca, bc, c], np.c_[ab, bc, ca]]
        )
    return v, f


# --------------------------------------------------------------------------
# profiles of surfaces of revolution about the x-axis


@dataclass
class Profile:
    """Densely sampled generating curve ``(x, r)`` in the half-plane ``r >= 0``.

    ``closed=False`` means the curve runs from axis to axis (genus 0);
    ``closed=True`` means a periodic curve away from the axis (torus).
    """

    x: np.ndarray
    r: np.ndarray
    closed: bool = False
    s: np.ndarray = field(init=False)

    def __post_init__(self):
        seg = np.hypot(np.diff(self.x), np.diff(self.r))
        if self.closed:
            seg = np.r_[seg, np.hypot(self.x[0] - self.x[-1], self.r[0] - self.r[-1])]
        self.s = np.r_[0.0, np.cumsum(seg)]

    @property
    def length(self):
        return float(self.s[-1])

    def points(self):
        if self.closed:
            return np.c_[np.r_[self.x, self.x[0]], np.r_[self.r, self.r[0]]]
        return np.c_[self.x, self.r]

    def at(self, s):
        p = self.points()
        return np.c_[np.interp(s, self.s, p[:, 0]), np.interp(s, self.s, p[:, 1])]

    def curvatures(self):
        """Profile curvature and rotational curvature magnitudes at the samples."""
        p = self.points()
        if self.closed:
            p = p[:-1]
            d1 = (np.roll(p, -1, 0) - np.roll(p, 1, 0)) / 2.0
            d2 = np.roll(p, -1, 0) - 2 * p + np.roll(p, 1, 0)
        else:
            d1 = np.gradient(p, axis=0)
            d2 = np.gradient(d1, axis=0)
        sp = np.maximum(np.hypot(d1[:, 0], d1[:, 1]), 1e-300)
        k_prof = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3
        with np.errstate(divide="ignore", invalid="ignore"):
            k_rot = np.where(p[:, 1] > 0, np.abs(d1[:, 0]) / sp / p[:, 1], k_prof)
        if self.closed:
            return np.r_[k_prof, k_prof[0]], np.r_[k_rot, k_rot[0]]
        # at the poles both curvatures coincide
        k_prof[0], k_prof[-1] = k_prof[1], k_prof[-2]
        k_rot[0], k_rot[-1] = k_prof[0], k_prof[-1]
        return k_prof, k_rot


def _arc(center, radius, start, end, ccw):
    """Circular arc from point ``start`` to point ``end`` about ``center``."""
    c = np.asarray(center, float)
    a0 = np.arctan2(start[1] - c[1], start[0] - c[0])
    a1 = np.arctan2(end[1] - c[1], end[0] - c[0])
    if ccw and a1 <= a0:
        a1 += 2 * np.pi
    if not ccw and a1 >= a0:
        a1 -= 2 * np.pi
    return ("arc", c, float(radius), a0, a1)


def _line(p0, p1):
    return ("line", np.asarray(p0, float), np.asarray(p1, float))


def profile_from_segments(segments, ds=None):
    """Densely sample a chain of arcs and line segments into a :class:`Profile`."""
    lengths = []
    for seg in segments:
        if seg[0] == "arc":
            lengths.append(seg[2] * abs(seg[4] - seg[3]))
        else:
            lengths.append(float(np.linalg.norm(seg[2] - seg[1])))
    if ds is None:
        ds = sum(lengths) / 60000.0
    pts = []
    for seg, length in zip(segments, lengths):
        if seg[0] == "arc":
            _, c, rad, a0, a1 = seg
            n = max(64, int(np.ceil(length / min(ds, rad / 64.0))))
            t = np.linspace(a0, a1, n + 1)
            p = c + rad * np.c_[np.cos(t), np.sin(t)]
        else:
            _, p0, p1 = seg
            n = max(4, int(np.ceil(length / ds)))
            t = np.linspace(0.0, 1.0, n + 1)[:, None]
            p = p0 + t * (p1 - p0)
        pts.append(p if not pts else p[1:])
    p = np.vstack(pts)
    p[0, 1] = p[-1, 1] = 0.0
    return Profile(p[:, 0], np.maximum(p[:, 1], 0.0))


def _fillet(ball_x, ball_radius, tube_radius, fillet):
    """Rolling-ball fillet joining a ball centred on the axis to a tube on its +x side.

    Returns the fillet centre and its tangent points on the ball and on the tube.
    """
    cx = ball_x + np.sqrt((ball_radius + fillet) ** 2 - (tube_radius + fillet) ** 2)
    c = np.array([cx, tube_radius + fillet])
    d = c - np.array([ball_x, 0.0])
    on_ball = np.array([ball_x, 0.0]) + ball_radius * d / np.linalg.norm(d)
    return c, on_ball, np.array([cx, tube_radius])


def sphere_profile(radius=1.0, center=0.0):
    return profile_from_segments(
        [_arc((center, 0.0), radius, (center - radius, 0.0), (center + radius, 0.0), ccw=False)]
    )


def ellipsoid_profile(a, b, n=60001):
    """Spheroid with semi-axis ``a`` along the axis and ``b`` around it."""
    u = np.linspace(0.0, np.pi, n)
    x = -a * np.cos(u)
    r = b * np.sin(u)
    r[0] = r[-1] = 0.0
    return Profile(x, r)


def capped_cylinder_profile(radius, length):
    h = length / 2.0
    return profile_from_segments(
        [
            _arc((-h, 0.0), radius, (-h - radius, 0.0), (-h, radius), ccw=False),
            _line((-h, radius), (h, radius)),
            _arc((h, 0.0), radius, (h, radius), (h + radius, 0.0), ccw=False),
        ]
    )


def dumbbell_profile(neck, bell=1.0, separation=None, fillet=None):
    """Bells of radius ``bell`` centred at ``+-separation`` (default ``1.6 bell``)
    joined by a neck tube of radius ``neck``; fillet radius defaults to ``bell / 4``."""
    c = 1.6 * bell if separation is None else separation
    f = bell / 4.0 if fillet is None else fillet
    fc, on_ball, on_tube = _fillet(-c, bell, neck, f)
    if on_tube[0] >= 0:
        raise InvalidParameter("bells too close for the requested neck and fillet")
    flip = np.array([-1.0, 1.0])
    return profile_from_segments(
        [
            _arc((-c, 0.0), bell, (-c - bell, 0.0), on_ball, ccw=False),
            _arc(fc, f, on_ball, on_tube, ccw=True),
            _line(on_tube, on_tube * flip),
            _arc(fc * flip, f, on_tube * flip, on_ball * flip, ccw=True),
            _arc((c, 0.0), bell, on_ball * flip, (c + bell, 0.0), ccw=False),
        ]
    )


def spiked_sphere_profile(length, width, radius=1.0, fillet=None):
    """Sphere of ``radius`` with one spike of tube radius ``width`` whose tip
    lies ``length`` beyond the sphere on the +x axis.

    The junction is a rolling-ball fillet of radius ``width / 2``.
    """
    f = width / 2.0 if fillet is None else fillet
    fc, on_ball, on_tube = _fillet(0.0, radius, width, f)
    x_end = radius + length - width
    if x_end <= on_tube[0]:
        raise InvalidParameter("spike too short for its width")
    return profile_from_segments(
        [
            _arc((0.0, 0.0), radius, (-radius, 0.0), on_ball, ccw=False),
            _arc(fc, f, on_ball, on_tube, ccw=True),
            _line(on_tube, (x_end, width)),
            _arc((x_end, 0.0), width, (x_end, width), (x_end + width, 0.0), ccw=False),
        ]
    )


def torus_profile(major, minor, n=20000):
    u = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return Profile(minor * np.cos(u), major + minor * np.sin(u), closed=True)


def perturbed_sphere_radius(radius, eps, degree=2):
    """Radial function ``radius * (1 + eps * P_degree(cos theta))`` about the x-axis."""
    def f(unit):
        return radius * (1.0 + eps * eval_legendre(degree, unit[:, 0]))
    return f


# --------------------------------------------------------------------------
# meshing


def segments_per_circle(level):
    return max(12, int(round(8 * 2.0 ** (level - 3))))


def _gradate(h, s, grade):
    # cone-limited gradation: h(s) <= min_j h(s_j) + grade |s - s_j|
    fwd = np.minimum.accumulate(h - grade * s) + grade * s
    bwd = (np.minimum.accumulate((h + grade * s)[::-1]))[::-1] - grade * s
    return np.minimum(np.minimum(h, fwd), bwd)


def _sizing(profile, h0, level, aspect=3.0, grade=0.5):
    """Circumferential and meridional target edge lengths along the profile.

    Around the axis the edge follows the rotational curvature, along the
    profile it follows the profile curvature; neither may exceed ``aspect``
    times the other.
    """
    alpha = 2 * np.pi / segments_per_circle(level)
    k_prof, k_rot = profile.curvatures()
    h_circ = np.minimum(h0, alpha / np.maximum(k_rot, 1e-12))
    h_mer = np.minimum(h0, alpha / np.maximum(k_prof, 1e-12))
    s = profile.s
    h_mer = _gradate(np.minimum(h_mer, aspect * h_circ), s, grade)
    h_circ = _gradate(np.minimum(h_circ, aspect * h_mer), s, grade)
    return h_circ, h_mer


def _ring_positions(profile, h):
    density = 1.0 / h
    seg = np.diff(profile.s)
    cum = np.r_[0.0, np.cumsum(0.5 * (density[1:] + density[:-1]) * seg)]
    count = max(int(np.ceil(cum[-1])), 3)
    targets = np.linspace(0.0, cum[-1], count + 1)
    return np.interp(targets, cum, profile.s), count


def _zip_rings(a_idx, a_phase, b_idx, b_phase):
    """Triangulate the band between two closed rings of vertex indices."""
    na, nb = len(a_idx), len(b_idx)
    ta = a_phase + 2 * np.pi * np.arange(na + 1) / na
    tb = b_phase + 2 * np.pi * np.arange(nb + 1) / nb
    tris = []
    i = j = 0
    while i < na or j < nb:
        advance_a = j >= nb or (i < na and ta[i + 1] <= tb[j + 1])
        if advance_a:
            tris.append((a_idx[i % na], a_idx[(i + 1) % na], b_idx[j % nb]))
            i += 1
        else:
            tris.append((a_idx[i % na], b_idx[(j + 1) % nb], b_idx[j % nb]))
            j += 1
    return tris


def revolve(profile, level, diameter=None):
    """Mesh the surface of revolution of ``profile`` about the x-axis."""
    if diameter is None:
        diameter = max(np.ptp(profile.x), 2 * profile.r.max())
    h0 = diameter * 2.0 ** (-level)
    h_circ, h_mer = _sizing(profile, h0, level)
    n_min = 6
    verts = []
    faces = []
    if profile.closed:
        s_ring, count = _ring_positions(profile, h_mer)
        s_ring = s_ring[:-1]
    else:
        s_ring, count = _ring_positions(profile, h_mer)
        s_ring = s_ring[1:-1]
        verts.append([profile.x[0], 0.0, 0.0])
    pts = profile.at(s_ring)
    h_ring = np.interp(s_ring, profile.s, h_circ)
    rings = []
    for k, ((x, r), h) in enumerate(zip(pts, h_ring)):
        n = max(n_min, int(round(2 * np.pi * r / h)))
        phase = (0.5 * (k % 2)) * 2 * np.pi / n
        th = phase + 2 * np.pi * np.arange(n) / n
        start = len(verts)
        verts.extend(np.c_[np.full(n, x), r * np.cos(th), r * np.sin(th)].tolist())
        rings.append((np.arange(start, start + n), phase))
    for (ia, pa), (ib, pb) in zip(rings[:-1], rings[1:]):
        faces.extend(_zip_rings(ia, pa, ib, pb))
    if profile.closed:
        (ia, pa), (ib, pb) = rings[-1], rings[0]
        faces.extend(_zip_rings(ia, pa, ib, pb))
    else:
        first, _ = rings[0]
        n = len(first)
        faces.extend((0, first[(i + 1) % n], first[i]) for i in range(n))
        last, _ = rings[-1]
        tip = len(verts)
        verts.append([profile.x[-1], 0.0, 0.0])
        n = len(last)
        faces.extend((tip, last[i], last[(i + 1) % n]) for i in range(n))
    return build_mesh(np.array(verts), np.array(faces))


# --------------------------------------------------------------------------
# public generators


def _positive(**kw):
    for name, val in kw.items():
        if not np.isfinite(val) or val <= 0:
            raise InvalidParameter(f"{name} must be positive, got {val}")


def sphere(radius=1.0, center=(0.0, 0.0, 0.0), level=4):
    _positive(radius=radius)
    v, f = icosphere(level)
    return build_mesh(radius * v + np.asarray(center, float), f)


def ellipsoid(a, b, c, level=4, center=(0.0, 0.0, 0.0)):
    """Ellipsoid with semi-axes ``a, b, c`` along x, y, z."""
    _positive(a=a, b=b, c=c)
    v, f = icosphere(level)
    return build_mesh(v * np.array([a, b, c]) + np.asarray(center, float), f)


def perturbed_sphere(radius=2.0, eps=0.1, level=4, degree=2):
    """Normal graph ``radius (1 + eps P_degree(cos theta))`` over the round sphere."""
    _positive(radius=radius)
    v, f = icosphere(level)
    rad = perturbed_sphere_radius(radius, eps, degree)(v)
    if np.any(rad <= 0):
        raise InvalidParameter("perturbation makes the radius non-positive")
    return build_mesh(v * rad[:, None], f)


def torus(major, minor, level=4):
    _positive(major=major, minor=minor)
    if minor >= major:
        raise InvalidParameter("torus needs minor < major")
    return revolve(torus_profile(major, minor), level, diameter=2 * (major + minor))


def capped_cylinder(radius, length, level=4):
    """Cylinder of ``radius`` whose straight part has ``length``, closed by hemispheres."""
    _positive(radius=radius, length=length)
    return revolve(capped_cylinder_profile(radius, length), level)


def dumbbell(neck, level=4, bell=1.0):
    _positive(neck=neck, bell=bell)
    if neck >= bell:
        raise InvalidParameter("neck radius must be smaller than the bells")
    return revolve(dumbbell_profile(neck, bell), level)


def spiked_sphere(length, width, level=4, radius=1.0):
    """Unit sphere with one spike of tube radius ``width`` and ``length``."""
    _positive(length=length, width=width, radius=radius)
    if width >= radius:
        raise InvalidParameter("spike width must be smaller than the sphere radius")
    return revolve(spiked_sphere_profile(length, width, radius), level, diameter=2 * radius)


GENERATORS = {
    "sphere": sphere,
    "ellipsoid": ellipsoid,
    "torus": torus,
    "capped_cylinder": capped_cylinder,
    "dumbbell": dumbbell,
    "spiked_sphere": spiked_sphere,
    "perturbed_sphere": perturbed_sphere,
}

# short keys accepted in shape-spec strings
_ALIASES = {
    "sphere": {"r": "radius", "c": "center"},
    "ellipsoid": {},
    "torus": {"R": "major", "r": "minor"},
    "capped_cylinder": {"r": "radius", "l": "length"},
    "dumbbell": {"r": "neck"},
    "spiked_sphere": {"l": "length", "w": "width", "r": "radius"},
    "perturbed_sphere": {"r": "radius"},
}


def parse_shape_spec(spec):
    """Parse ``"name:key=value,key=value"`` into ``(name, kwargs)``.

    Vector values use ``/`` as separator, e.g. ``center=1/0/0``.
    """
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?::(.*))?", spec)
    if not m or m.group(1) not in GENERATORS:
        raise InvalidParameter(f"unknown shape spec {spec!r}")
    name, rest = m.group(1), m.group(2) or ""
    kwargs = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        if "=" not in item:
            raise InvalidParameter(f"malformed item {item!r} in {spec!r}")
        key, val = (t.strip() for t in item.split("=", 1))
        key = _ALIASES[name].get(key, key)
        try:
            if "/" in val:
                kwargs[key] = tuple(float(t) for t in val.split("/"))
            elif key == "level" or key == "degree":
                kwargs[key] = int(val)
            else:
                kwargs[key] = float(val)
        except ValueError as exc:
            raise InvalidParameter(f"bad value {val!r} for {key}") from exc
    return name, kwargs


def generate(spec, **overrides):
    """Build a mesh from a shape-spec string or a ``(name, kwargs)`` pair."""
    if isinstance(spec, str):
        name, kwargs = parse_shape_spec(spec)
    else:
        name, kwargs = spec
        kwargs = dict(kwargs)
    kwargs.update(overrides)
    try:
        return GENERATORS[name](**kwargs)
    except TypeError as exc:
        raise InvalidParameter(str(exc)) from exc


def shape_profile(name, **kw):
    """Generating profile of an axisymmetric shape (for the profile flow)."""
    if name == "sphere":
        return sphere_profile(kw.get("radius", 1.0))
    if name == "ellipsoid":
        a, b, c = kw["a"], kw["b"], kw["c"]
        if not np.isclose(b, c):
            raise InvalidParameter("only spheroids (b == c) are axisymmetric about x")
        return ellipsoid_profile(a, b)
    if name == "capped_cylinder":
        return capped_cylinder_profile(kw["radius"], kw["length"])
    if name == "dumbbell":
        return dumbbell_profile(kw["neck"], kw.get("bell", 1.0))
    if name == "spiked_sphere":
        return spiked_sphere_profile(kw["length"], kw["width"], kw.get("radius", 1.0))
    if name == "torus":
        return torus_profile(kw["major"], kw["minor"])
    raise InvalidParameter(f"no profile for {name}")
