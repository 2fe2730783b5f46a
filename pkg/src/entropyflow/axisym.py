"""Mean curvature flow of surfaces of revolution about the x-axis.

The generating curve ``X(u) = (x, r)`` moves by

    X_t = X_ss - (N_r / r) N

where ``N = (-r_s, x_s)`` is the outward normal and ``s`` is arc length:
the first term is the profile curvature, the second the rotational
curvature.  On the axis (cap nodes) the two curvatures agree and the node
moves along the axis with twice the profile term.

Time stepping is linearly implicit BDF2: both terms are linear in ``X``
once the segment lengths and ``N_r / r`` are frozen at the extrapolated
state.  Chord-based second differences are exact on circles, so round
spheres and cylinders carry only the time-stepping error.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .errors import CapDegeneracy, InsufficientStates, InvalidParameter, NeckPinch, SolveFailure


@dataclass(frozen=True)
class AxisymProfile:
    """Generating curve of a surface of revolution.

    ``ends`` is ``"caps"`` (both ends on the axis), ``"periodic"`` (the curve
    repeats with x-shift ``period``; the last node is not duplicated) or
    ``"closed"`` (a loop off the axis, e.g. a torus).
    """

    x: np.ndarray
    r: np.ndarray
    ends: str = "caps"
    period: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, float).copy()
        r = np.asarray(self.r, float).copy()
        if x.shape != r.shape or x.ndim != 1 or len(x) < 5:
            raise InvalidParameter("profile needs matching 1-D arrays with at least 5 samples")
        if self.ends not in ("caps", "periodic", "closed"):
            raise InvalidParameter(f"unknown end condition {self.ends!r}")
        if self.ends == "caps":
            r[0] = r[-1] = 0.0
            if np.any(r[1:-1] <= 0):
                raise InvalidParameter("interior samples must have r > 0")
        elif np.any(r <= 0):
            raise InvalidParameter("samples must have r > 0")
        x.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", r)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_profile(cls, profile, n=400):
        """Resample a dense :class:`~entropyflow.shapes.Profile` uniformly in arc length."""
        s = profile.s
        if profile.closed:
            t = np.linspace(0.0, s[-1], n + 1)[:-1]
            return cls(np.interp(t, s, profile.x), np.interp(t, s, profile.r), "closed")
        t = np.linspace(0.0, s[-1], n + 1)
        return cls(np.interp(t, s, profile.x), np.interp(t, s, profile.r), "caps")

    @classmethod
    def sphere(cls, radius=2.0, n=400, center=0.0):
        th = np.linspace(np.pi, 0.0, n + 1)
        return cls(center + radius * np.cos(th), radius * np.sin(th), "caps")

    @classmethod
    def cylinder(cls, radius=2.0, period=1.0, n=64):
        x = np.arange(n) * period / n
        return cls(x, np.full(n, float(radius)), "periodic", float(period))

    # -- geometry -------------------------------------------------------------

    @property
    def n(self):
        return len(self.x)

    @property
    def points(self):
        return np.c_[self.x, self.r]

    def _neighbors(self):
        """Previous and next node positions, honouring the end condition."""
        p = self.points
        if self.ends == "caps":
            prev = np.r_[[[p[1, 0], -p[1, 1]]], p[:-1]]
            nxt = np.r_[p[1:], [[p[-2, 0], -p[-2, 1]]]]
        else:
            shift = np.array([self.period if self.ends == "periodic" else 0.0, 0.0])
            prev = np.roll(p, 1, axis=0)
            prev[0] -= shift
            nxt = np.roll(p, -1, axis=0)
            nxt[-1] += shift
        return prev, nxt

    def segment_lengths(self):
        p = self.points
        if self.ends == "caps":
            return np.linalg.norm(np.diff(p, axis=0), axis=1)
        _, nxt = self._neighbors()
        return np.linalg.norm(nxt - p, axis=1)

    @property
    def length(self):
        return float(self.segment_lengths().sum())

    def normals(self):
        prev, nxt = self._neighbors()
        t = nxt - prev
        t /= np.linalg.norm(t, axis=1)[:, None]
        return np.c_[-t[:, 1], t[:, 0]]

    def curvatures(self):
        """Signed profile and rotational curvatures (positive on convex shapes)."""
        prev, nxt = self._neighbors()
        p = self.points
        a, b = p - prev, nxt - p
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        la, lb, lc = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1), np.linalg.norm(nxt - prev, axis=1)
        # Menger curvature; a clockwise turn (as on the top of a sphere) is convex
        k_prof = -2.0 * cross / (la * lb * lc)
        nrm = self.normals()
        with np.errstate(divide="ignore", invalid="ignore"):
            k_rot = nrm[:, 1] / self.r
        if self.ends == "caps":
            k_rot[0], k_rot[-1] = k_prof[0], k_prof[-1]
        return k_prof, k_rot

    def mean_curvature(self):
        k1, k2 = self.curvatures()
        return k1 + k2

    def second_fundamental_norm(self):
        k1, k2 = self.curvatures()
        return np.sqrt(k1 * k1 + k2 * k2)

    def area(self):
        """Area of the surface of revolution (trapezoid rule in arc length)."""
        p = self.points
        _, nxt = self._neighbors()
        if self.ends == "caps":
            seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
            return float(np.pi * ((self.r[1:] + self.r[:-1]) * seg).sum())
        seg = np.linalg.norm(nxt - p, axis=1)
        return float(np.pi * ((self.r + nxt[:, 1]) * seg).sum())

    def diameter(self):
        return float(max(np.ptp(self.x) + (self.period if self.ends == "periodic" else 0.0), 2 * self.r.max()))

    def with_points(self, x, r):
        return AxisymProfile(x, r, self.ends, self.period)

    # -- resampling -----------------------------------------------------------

    def nonuniformity(self):
        h = self.segment_lengths()
        return float(h.max() / h.min())

    def resampled(self, n=None):
        """Cubic-spline resampling to uniform arc length.

        Cap ends are mirrored across the axis first so the spline sees the
        odd symmetry of ``r``.
        """
        n = self.n if n is None else n
        p = self.points
        if self.ends == "caps":
            k = min(4, self.n - 2)
            left = p[k:0:-1] * [1.0, -1.0]
            right = p[-2 : -2 - k : -1] * [1.0, -1.0]
            q = np.r_[left, p, right]
            s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(q, axis=0), axis=1))]
            s0, s1 = s[k], s[k + self.n - 1]
            cs = CubicSpline(s, q, axis=0)
            t = np.linspace(s0, s1, n)
            out = cs(t)
            return AxisymProfile(out[:, 0], out[:, 1], "caps")
        shift = np.array([self.period if self.ends == "periodic" else 0.0, 0.0])
        q = np.r_[p, p[:1] + shift]
        s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(q, axis=0), axis=1))]
        lin = np.outer(s / s[-1], shift)
        cs = CubicSpline(s, q - lin, axis=0, bc_type="periodic")
        t = np.linspace(0.0, s[-1], n + 1)[:-1]
        out = cs(t) + np.outer(t / s[-1], shift)
        return AxisymProfile(out[:, 0], out[:, 1], self.ends, self.period)


# --------------------------------------------------------------------------
# linear operator


def _operator(prof):
    """Velocity ``V = A X + b`` (X stacked as [x; r]) with coefficients frozen at ``prof``."""
    n = prof.n
    prev, nxt = prof._neighbors()
    p = prof.points
    hp = np.linalg.norm(p - prev, axis=1)
    hn = np.linalg.norm(nxt - p, axis=1)
    ip = np.arange(n) - 1
    inx = np.arange(n) + 1
    shift = np.zeros(n)
    if prof.ends == "caps":
        ip[0], inx[-1] = 1, n - 2
    else:
        ip %= n
        inx %= n
        if prof.ends == "periodic":
            shift[0] = -prof.period  # x of prev at node 0 is x[n-1] - period
    shift_n = np.zeros(n)
    if prof.ends == "periodic":
        shift_n[-1] = prof.period

    b = np.zeros(2 * n)
    idx = np.arange(n)

    # second difference in arc length, doubled at the caps; the ghost
    # neighbour of a cap node is its mirror image, so r enters with a minus
    cp = 2.0 / (hp * (hp + hn))
    cn = 2.0 / (hn * (hp + hn))
    mult = np.ones(n)
    sign_p = np.ones(n)
    sign_n = np.ones(n)
    if prof.ends == "caps":
        mult[0] = mult[-1] = 2.0
        sign_p[0] = sign_n[-1] = -1.0
    rows = [idx, idx, idx, n + idx, n + idx, n + idx]
    cols = [ip, inx, idx, n + ip, n + inx, n + idx]
    vals = [mult * cp, mult * cn, -mult * (cp + cn),
            mult * cp * sign_p, mult * cn * sign_n, -mult * (cp + cn)]
    b[:n] += cp * shift + cn * shift_n

    # rotational term  -(N_r / r) N  with N = J (X_next - X_prev) / |X_next - X_prev|
    d = nxt - prev
    dl = np.linalg.norm(d, axis=1)
    inner = np.ones(n, bool)
    if prof.ends == "caps":
        inner[0] = inner[-1] = False
    q = np.zeros(n)
    q[inner] = d[inner, 0] / (dl[inner] ** 2 * prof.r[inner])
    i = np.flatnonzero(inner)
    # x-velocity: +q (r_next - r_prev); r-velocity: -q (x_next - x_prev)
    rows += [i, i, n + i, n + i]
    cols += [n + inx[i], n + ip[i], inx[i], ip[i]]
    vals += [q[i], -q[i], -q[i], q[i]]
    b[n:] += -q * (shift_n - shift)
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))
    return A, b


def _solve(prof, lhs_scale, rhs, dt):
    A, b = _operator(prof)
    n = prof.n
    rhs = rhs + dt * b
    if prof.ends == "caps":
        # r on the axis stays zero: replace those rows by the identity
        keep = np.ones(2 * n)
        keep[[n, 2 * n - 1]] = 0.0
        A = sp.diags(keep) @ A
        rhs[n] = rhs[2 * n - 1] = 0.0
    M = lhs_scale * sp.identity(2 * n, format="csr") - dt * A
    if prof.ends == "caps":
        M = M + sp.diags(1.0 - keep - lhs_scale * (1.0 - keep))
    sol = spsolve(M.tocsc(), rhs)
    if not np.all(np.isfinite(sol)):
        raise SolveFailure("profile system has no finite solution")
    return sol[:n], sol[n:]


def neck_radius(prof):
    """Smallest radius at a local minimum of ``r`` away from the caps (inf if none)."""
    r = prof.r
    if prof.ends == "caps":
        i = np.arange(2, prof.n - 2)
        rp, rn = r[i - 1], r[i + 1]
    else:
        i = np.arange(prof.n)
        rp, rn = np.roll(r, 1), np.roll(r, -1)
    mins = r[i][(r[i] <= rp) & (r[i] <= rn)]
    return float(mins.min()) if len(mins) else np.inf


def _check(prof, new, pinch):
    if prof.ends == "caps":
        if np.any(new.r[1:-1] <= 0):
            raise CapDegeneracy("profile crossed the axis")
        if new.x[1] <= new.x[0] or new.x[-1] <= new.x[-2]:
            raise CapDegeneracy("cap node overtook its neighbour")
    return neck_radius(new) < pinch


def mcf_step_axisym(profile, dt, *, pinch=None, resample_above=1.5, time=None):
    """One linearly implicit Euler step of the profile flow.

    Resamples to uniform arc length when the spacing ratio exceeds
    ``resample_above``.  Raises :class:`NeckPinch` when a neck (a local
    minimum of the radius) drops below ``pinch`` (default ``1e-4`` times the
    diameter).
    """
    if not dt > 0:
        raise InvalidParameter("dt must be positive")
    pinch = 1e-4 * profile.diameter() if pinch is None else pinch
    x, r = _solve(profile, 1.0, np.r_[profile.x, profile.r], dt)
    try:
        new = profile.with_points(x, r)
    except InvalidParameter as exc:
        raise CapDegeneracy(str(exc)) from exc
    if _check(profile, new, pinch):
        raise NeckPinch("neck radius below pinch threshold", profile=new, time=time)
    if new.nonuniformity() > resample_above:
        new = new.resampled()
    return new


# --------------------------------------------------------------------------
# trajectories


@dataclass
class FlowState:
    surface: object
    t: float
    step: int


@dataclass
class FlowTrajectory:
    states: list
    diagnostics: dict
    stop_reason: str
    round_point: object = None
    extras: dict = field(default_factory=dict)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def final(self):
        return self.states[-1]


STOP_HORIZON = "horizon reached"
STOP_BLOWUP = "curvature blowup"
STOP_DEGENERACY = "mesh degeneracy"
STOP_ROUND = "round point extracted"
STOP_PINCH = "neck pinch"


def axisym_evolve(
    profile,
    *,
    horizon=np.inf,
    dt=None,
    dt_factor=0.0025,
    h_factor=5.0,
    record_every=1,
    max_steps=200000,
    pinch=None,
    resample_above=1.5,
    scheme="bdf2",
    area_stop=1e-4,
    raise_on_pinch=False,
):
    """Evolve a profile by linearly implicit BDF2 (or Euler) steps.

    Without a fixed ``dt`` the step is ``min(dt_factor / max H^2,
    h_factor * h_min^2)``, clipped to land on ``horizon``.  Stops at the
    horizon, when the area falls below ``area_stop`` times the initial
    area, or at a neck pinch.
    """
    pinch = 1e-4 * profile.diameter() if pinch is None else pinch
    area0 = profile.area()
    cur, prev, dt_prev = profile, None, None
    t = 0.0
    states = [FlowState(cur, 0.0, 0)]
    diag = {"t": [0.0], "max_A": [float(cur.second_fundamental_norm().max())],
            "min_edge": [float(cur.segment_lengths().min())], "area": [area0], "dt": [0.0]}
    reason = STOP_HORIZON
    step = 0
    while t < horizon - 1e-14 and step < max_steps:
        if dt is None:
            H = cur.mean_curvature()
            h = cur.segment_lengths().min()
            step_dt = min(dt_factor / float(np.max(H * H)), h_factor * h * h)
        else:
            step_dt = dt
        step_dt = min(step_dt, horizon - t)
        if scheme == "bdf2" and prev is not None:
            w = step_dt / dt_prev
            a = (1.0 + 2.0 * w) / (1.0 + w)
            ext = cur.with_points((1 + w) * cur.x - w * prev.x, (1 + w) * cur.r - w * prev.r) \
                if cur.ends != "caps" or np.all((1 + w) * cur.r[1:-1] - w * prev.r[1:-1] > 0) else cur
            rhs = np.r_[(1 + w) * cur.x - w * w / (1 + w) * prev.x, (1 + w) * cur.r - w * w / (1 + w) * prev.r]
            x, r = _solve(ext, a, rhs, step_dt)
        else:
            x, r = _solve(cur, 1.0, np.r_[cur.x, cur.r], step_dt)
        try:
            new = cur.with_points(x, r)
        except InvalidParameter:
            reason = STOP_DEGENERACY
            break
        try:
            pinched = _check(cur, new, pinch)
        except CapDegeneracy:
            reason = STOP_DEGENERACY
            break
        step += 1
        t += step_dt
        if pinched:
            states.append(FlowState(new, t, step))
            _record(diag, new, t, step_dt)
            reason = STOP_PINCH
            if raise_on_pinch:
                raise NeckPinch("neck radius below pinch threshold", profile=new, time=t)
            break
        if new.nonuniformity() > resample_above:
            new = new.resampled()
            prev = None  # restart the two-step scheme on the new nodes
        else:
            prev = cur
        dt_prev = step_dt
        cur = new
        _record(diag, cur, t, step_dt)
        if step % record_every == 0:
            states.append(FlowState(cur, t, step))
        if cur.area() < area_stop * area0:
            reason = STOP_ROUND
            break
    if states[-1].step != step:
        states.append(FlowState(cur, t, step))
    return FlowTrajectory(states, {k: np.array(v) for k, v in diag.items()}, reason)


def _record(diag, prof, t, dt):
    diag["t"].append(t)
    diag["max_A"].append(float(prof.second_fundamental_norm().max()))
    diag["min_edge"].append(float(prof.segment_lengths().min()))
    diag["area"].append(prof.area())
    diag["dt"].append(dt)


# --------------------------------------------------------------------------
# phi and its evolution identity


def profile_phi(prof, t):
    """``2 t H + x.N`` at the profile nodes."""
    nrm = prof.normals()
    return 2.0 * t * prof.mean_curvature() + prof.x * nrm[:, 0] + prof.r * nrm[:, 1]


def _hit(prof, origin, direction):
    """Parameter ``lam`` and segment position where ``origin + lam * direction`` meets ``prof``.

    Returns the intersection nearest to ``origin``.
    """
    p = prof.points
    if prof.ends != "caps":
        shift = np.array([prof.period if prof.ends == "periodic" else 0.0, 0.0])
        p = np.r_[p - shift, p, p + shift]
    a, b = p[:-1], p[1:]
    e = b - a
    # solve origin + lam d = a + mu e
    det = direction[0] * (-e[:, 1]) - direction[1] * (-e[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = a - origin
        lam = (rhs[:, 0] * (-e[:, 1]) - rhs[:, 1] * (-e[:, 0])) / det
        mu = (direction[0] * rhs[:, 1] - direction[1] * rhs[:, 0]) / det
    ok = (mu >= -1e-12) & (mu <= 1 + 1e-12) & np.isfinite(lam)
    if not np.any(ok):
        return None
    k = np.flatnonzero(ok)[np.argmin(np.abs(lam[ok]))]
    return lam[k], k, float(np.clip(mu[k], 0.0, 1.0))


def _phi_along_normals(center, other, t_other, t_origin):
    """phi of ``other`` at the points where the normals of ``center`` cross it."""
    vals = profile_phi(other, t_other - t_origin)
    if other.ends != "caps":
        vals = np.r_[vals, vals, vals]
    nrm = center.normals()
    out = np.full(center.n, np.nan)
    for i in range(center.n):
        hit = _hit(other, center.points[i], nrm[i])
        if hit is None:
            continue
        _, k, mu = hit
        nxt = vals[(k + 1) % len(vals)]
        out[i] = (1.0 - mu) * vals[k] + mu * nxt
    return out


@dataclass
class SmoczykReport:
    max_residual: float
    residual: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    time: float
    nodes: np.ndarray


def smoczyk_check(trajectory, index=None, *, t_origin=0.0, cap_margin=0.1):
    """Residual of ``d/dt phi = Laplacian(phi) + |A|^2 phi`` at one state.

    The time derivative is the central difference between the neighbouring
    states, following the normal line of each node; the right side uses
    arc-length differences on the profile.  Nodes within ``cap_margin`` of
    the total length from a cap are excluded.
    """
    states = trajectory.states
    if len(states) < 3:
        raise InsufficientStates("need at least three states")
    if index is None:
        index = len(states) // 2
    if not 1 <= index <= len(states) - 2:
        raise InsufficientStates("state needs a neighbour on both sides")
    a, c, b = states[index - 1], states[index], states[index + 1]
    prof = c.surface
    phi_c = profile_phi(prof, c.t - t_origin)
    phi_a = _phi_along_normals(prof, a.surface, a.t, t_origin)
    phi_b = _phi_along_normals(prof, b.surface, b.t, t_origin)
    # second-order derivative for possibly unequal steps
    ha, hb = c.t - a.t, b.t - c.t
    lhs = (-hb / (ha * (ha + hb))) * phi_a + ((hb - ha) / (ha * hb)) * phi_c + (ha / (hb * (ha + hb))) * phi_b

    # arc-length Laplacian on the surface of revolution: f_ss + (r_s / r) f_s
    prev, nxt = prof._neighbors()
    p = prof.points
    hp = np.linalg.norm(p - prev, axis=1)
    hn = np.linalg.norm(nxt - p, axis=1)
    n = prof.n
    if prof.ends == "caps":
        fp = np.r_[phi_c[1], phi_c[:-1]]
        fn = np.r_[phi_c[1:], phi_c[-2]]
    else:
        fp, fn = np.roll(phi_c, 1), np.roll(phi_c, -1)
    f_s = (hp**2 * fn - hn**2 * fp + (hn**2 - hp**2) * phi_c) / (hp * hn * (hp + hn))
    f_ss = 2.0 * (hp * fn - (hp + hn) * phi_c + hn * fp) / (hp * hn * (hp + hn))
    t_vec = (nxt - prev) / np.linalg.norm(nxt - prev, axis=1)[:, None]
    k1, k2 = prof.curvatures()
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = f_ss + t_vec[:, 1] / prof.r * f_s
    rhs = lap + (k1 * k1 + k2 * k2) * phi_c
    keep = np.isfinite(lhs)
    if prof.ends == "caps":
        s = np.r_[0.0, np.cumsum(hn[:-1])]
        margin = cap_margin * s[-1]
        keep &= (s > margin) & (s < s[-1] - margin)
    res = np.abs(lhs - rhs)
    idx = np.flatnonzero(keep)
    return SmoczykReport(float(res[idx].max()), res[idx], lhs[idx], rhs[idx], c.t, idx)
