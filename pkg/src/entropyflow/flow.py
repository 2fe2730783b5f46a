"""Mean curvature flow of triangle meshes, round-point extraction, rescaling and monitors.

Mesh steps solve ``(M - dt L) x_new = M x_old`` with the lumped mixed-area
mass ``M`` and cotangent stiffness ``L`` frozen at the old positions, so
``M^-1 L x`` is the discrete mean curvature vector.  ``mcf_evolve`` uses
the variable-step BDF2 analogue of the same linear system, with the
operators taken at the extrapolated positions, and hands
surfaces of revolution to :func:`entropyflow.axisym.axisym_evolve`.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu
from scipy.spatial import cKDTree

from .axisym import (
    STOP_BLOWUP,
    STOP_DEGENERACY,
    STOP_HORIZON,
    STOP_PINCH,
    STOP_ROUND,
    AxisymProfile,
    FlowState,
    FlowTrajectory,
    axisym_evolve,
)
from .errors import (
    InvalidParameter,
    NotShrinkingToPoint,
    QualityCollapse,
    SolveFailure,
)
from .mesh import (
    TriangleMesh,
    cotangent_laplacian,
    mixed_areas,
    outward_normals,
    second_fundamental_norm,
    triangle_angles,
)
from .metrics import best_sphere_fit, hausdorff_distance
from .shapes import Profile, revolve

LAMBDA_1 = float(np.sqrt(2.0 * np.pi / np.e))
MIN_ANGLE = np.deg2rad(2.0)


# --------------------------------------------------------------------------
# discrete operators


def _system(mesh):
    return sp.diags(mixed_areas(mesh)), cotangent_laplacian(mesh)


def _solve(lhs, rhs, guess=None):
    """Solve the SPD system ``lhs x = rhs`` column by column with conjugate gradients.

    ``lhs = a M - dt L`` is a mass matrix plus a small multiple of the
    stiffness, so a handful of Jacobi-preconditioned iterations suffice; a
    sparse LU factorization is the fallback.
    """
    lhs = lhs.tocsr()
    pre = sp.diags(1.0 / lhs.diagonal())
    out = np.empty_like(rhs)
    for k in range(rhs.shape[1]):
        x0 = None if guess is None else guess[:, k]
        x, info = cg(lhs, rhs[:, k], x0=x0, rtol=1e-13, atol=0.0, maxiter=500, M=pre)
        if info != 0:
            try:
                x = splu(lhs.tocsc()).solve(np.ascontiguousarray(rhs[:, k]))
            except RuntimeError as exc:
                raise SolveFailure(f"sparse solve failed: {exc}") from exc
        out[:, k] = x
    if not np.all(np.isfinite(out)):
        raise SolveFailure("non-finite positions after the linear solve")
    return out


def curvature_norm_fast(mesh):
    """Per-vertex ``|A|`` from ``|A|^2 = H^2 - 2K`` (cotangent H, angle-defect K).

    Cheap enough for every step; :func:`entropyflow.mesh.second_fundamental_norm`
    is the accurate (fitted) alternative.
    """
    areas = mixed_areas(mesh)
    hvec = (cotangent_laplacian(mesh) @ mesh.vertices) / areas[:, None]
    h2 = np.einsum("ij,ij->i", hvec, hvec)
    ang = triangle_angles(mesh.corners)
    total = np.zeros(mesh.n_vertices)
    np.add.at(total, mesh.faces.ravel(), ang.ravel())
    k = (2.0 * np.pi - total) / areas
    return np.sqrt(np.maximum(h2 - 2.0 * k, 0.5 * h2))


def _incident_max_edge(mesh):
    e = mesh.edges
    ln = mesh.edge_lengths
    out = np.zeros(mesh.n_vertices)
    np.maximum.at(out, e[:, 0], ln)
    np.maximum.at(out, e[:, 1], ln)
    return out


def tangential_relax(mesh, strength=0.5):
    """Move vertices toward their neighbour average within the tangent plane.

    The displacement is projected off the vertex normal, so every vertex
    keeps its normal coordinate up to round-off.
    """
    adj = mesh.adjacency
    deg = np.asarray(adj.sum(axis=1)).ravel()
    avg = (adj @ mesh.vertices) / deg[:, None]
    d = avg - mesh.vertices
    n = outward_normals(mesh)
    d -= np.einsum("ij,ij->i", d, n)[:, None] * n
    return mesh.with_vertices(mesh.vertices + strength * d)


# --------------------------------------------------------------------------
# single step


def mcf_step_mesh(state, dt, *, cap=0.5, relax=0.0):
    """One semi-implicit step ``(M - dt L) x_new = M x_old``.

    ``state`` is a :class:`FlowState` or a mesh (time 0).  ``dt`` must not
    exceed ``cap * (min edge)^2``.  ``relax > 0`` applies one tangential
    relaxation sweep of that strength after the step.
    """
    if not isinstance(state, FlowState):
        state = FlowState(state, 0.0, 0)
    mesh = state.surface
    h = float(mesh.edge_lengths.min())
    if not dt > 0 or dt > cap * h * h:
        raise InvalidParameter(f"dt={dt} outside (0, {cap} * min_edge^2 = {cap * h * h}]")
    m, lap = _system(mesh)
    x = _solve(m - dt * lap, m @ mesh.vertices, mesh.vertices)
    new = mesh.with_vertices(x)
    if relax > 0:
        new = tangential_relax(new, relax)
    if new.min_angle < MIN_ANGLE:
        raise QualityCollapse(f"minimum angle {np.rad2deg(new.min_angle):.3g} deg after step",
                              state=FlowState(new, state.t + dt, state.step + 1))
    return FlowState(new, state.t + dt, state.step + 1)


# --------------------------------------------------------------------------
# evolution


def mcf_evolve(
    initial,
    *,
    horizon=np.inf,
    dt=None,
    curvature_cap=0.1,
    edge_cap=0.5,
    record_every=1,
    max_steps=100000,
    scheme="bdf2",
    relax_every=1,
    relax_strength=0.2,
    area_stop=1e-4,
    blowup=2.0,
    min_edge_fraction=1e-4,
    detect=True,
    **axisym_options,
):
    """Evolve a closed mesh (or an :class:`AxisymProfile`) by mean curvature.

    The adaptive step is ``min(edge_cap * h_min^2, (curvature_cap / max|A|)^2)``
    so ``max|A| * sqrt(dt)`` stays below ``curvature_cap``.  Stops:

    * horizon reached;
    * area below ``area_stop`` times the initial area (round point; the
      estimate is attached when ``detect`` and the fit succeeds, otherwise
      the reason becomes mesh degeneracy);
    * curvature blowup when ``|A| * (longest incident edge) > blowup`` at
      some vertex;
    * mesh degeneracy when the shortest edge drops below
      ``min_edge_fraction`` times the initial diameter or the minimum angle
      collapses.

    Every ``relax_every`` steps one tangential relaxation sweep of strength
    ``relax_strength`` redistributes vertices (0 disables it); the previous
    state used by BDF2 receives the same tangential shift.
    """
    if isinstance(initial, AxisymProfile):
        traj = axisym_evolve(initial, horizon=horizon, dt=dt, record_every=record_every,
                             max_steps=max_steps, scheme=scheme, area_stop=area_stop, **axisym_options)
        return _attach_round_point(traj, detect)
    if axisym_options:
        raise InvalidParameter(f"unknown options {sorted(axisym_options)}")
    if isinstance(initial, FlowState):
        initial = initial.surface
    mesh = initial
    diam0 = mesh.diameter
    area0 = mesh.area
    states = [FlowState(mesh, 0.0, 0)]
    diag = {"t": [], "max_A": [], "min_edge": [], "area": [], "dt": []}
    _diagnose(diag, mesh, 0.0, 0.0)
    t, step = 0.0, 0
    prev, dt_prev = None, None
    reason = STOP_HORIZON
    while t < horizon - 1e-14 and step < max_steps:
        amax = diag["max_A"][-1]
        h = diag["min_edge"][-1]
        step_dt = dt if dt is not None else min(edge_cap * h * h, (curvature_cap / amax) ** 2)
        step_dt = min(step_dt, horizon - t)
        if scheme == "bdf2" and prev is not None:
            # operators at the extrapolated state keep the scheme second order
            w = step_dt / dt_prev
            a = (1.0 + 2.0 * w) / (1.0 + w)
            ext = (1.0 + w) * mesh.vertices - w * prev.vertices
            m, lap = _system(mesh.with_vertices(ext))
            rhs = m @ ((1.0 + w) * mesh.vertices - (w * w / (1.0 + w)) * prev.vertices)
            x = _solve(a * m - step_dt * lap, rhs, ext)
        else:
            m, lap = _system(mesh)
            x = _solve(m - step_dt * lap, m @ mesh.vertices, mesh.vertices)
        new = mesh.with_vertices(x)
        step += 1
        t += step_dt
        prev, dt_prev = mesh, step_dt
        if relax_strength > 0 and step % relax_every == 0:
            moved = tangential_relax(new, relax_strength)
            # the history gets the same tangential shift, a pure reparametrization
            prev = prev.with_vertices(prev.vertices + (moved.vertices - new.vertices))
            new = moved
        mesh = new
        _diagnose(diag, mesh, t, step_dt)
        if step % record_every == 0:
            states.append(FlowState(mesh, t, step))
        if mesh.area < area_stop * area0:
            reason = STOP_ROUND
            break
        if mesh.min_angle < MIN_ANGLE or diag["min_edge"][-1] < min_edge_fraction * diam0:
            reason = STOP_DEGENERACY
            break
        if diag["extras_blowup"][-1] > blowup:
            reason = STOP_BLOWUP
            break
    if states[-1].step != step:
        states.append(FlowState(mesh, t, step))
    blow = diag.pop("extras_blowup")
    traj = FlowTrajectory(states, {k: np.array(v) for k, v in diag.items()}, reason,
                          extras={"resolution": np.array(blow)})
    return _attach_round_point(traj, detect)


def _diagnose(diag, mesh, t, dt):
    a = curvature_norm_fast(mesh)
    diag["t"].append(t)
    diag["max_A"].append(float(a.max()))
    diag["min_edge"].append(float(mesh.edge_lengths.min()))
    diag["area"].append(float(mesh.area))
    diag["dt"].append(dt)
    diag.setdefault("extras_blowup", []).append(float((a * _incident_max_edge(mesh)).max()))


def _attach_round_point(traj, detect):
    if traj.stop_reason != STOP_ROUND or not detect:
        return traj
    try:
        traj.round_point = detect_round_point(traj)
    except NotShrinkingToPoint as exc:
        traj.stop_reason = STOP_DEGENERACY
        traj.extras["round_point_error"] = str(exc)
    return traj


# --------------------------------------------------------------------------
# surfaces of either kind


def as_mesh(surface, level=5):
    """The surface as a triangle mesh (profiles are revolved about the x-axis)."""
    if isinstance(surface, TriangleMesh):
        return surface
    if isinstance(surface, AxisymProfile):
        if surface.ends == "periodic":
            raise InvalidParameter("a periodic profile has no closed mesh")
        return revolve(Profile(np.asarray(surface.x), np.asarray(surface.r), surface.ends == "closed"), level)
    raise InvalidParameter(f"not a surface: {type(surface).__name__}")


def _transform(surface, shift, scale):
    """``scale * (surface - shift)``; profiles require ``shift`` on the axis."""
    if isinstance(surface, AxisymProfile):
        return surface.with_points((surface.x - shift[0]) * scale, surface.r * scale)
    return surface.with_vertices((surface.vertices - shift) * scale)


def _max_curvature(surface):
    if isinstance(surface, AxisymProfile):
        return float(surface.second_fundamental_norm().max())
    return float(second_fundamental_norm(surface).max())


def _profile_samples(prof, spacing):
    pts = prof.points
    if prof.ends in ("closed", "periodic"):
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.r_[0.0, np.cumsum(seg)]
    u = np.linspace(0.0, s[-1], max(int(np.ceil(s[-1] / spacing)), 2) + 1)
    return np.c_[np.interp(u, s, pts[:, 0]), np.interp(u, s, pts[:, 1])], float(s[-1] / (len(u) - 1))


def surface_distance(a, b):
    """Hausdorff distance ``(value, bound)`` between two surfaces of the same kind.

    Surfaces of revolution about a common axis are compared through their
    generating curves, which gives the same distance.
    """
    if isinstance(a, AxisymProfile) and isinstance(b, AxisymProfile):
        spacing = 0.25 * min(a.segment_lengths().mean(), b.segment_lengths().mean())
        pa, ha = _profile_samples(a, spacing)
        pb, hb = _profile_samples(b, spacing)
        value = max(cKDTree(pb).query(pa)[0].max(), cKDTree(pa).query(pb)[0].max())
        return float(value), 0.5 * max(ha, hb)
    return hausdorff_distance(as_mesh(a), as_mesh(b))


# --------------------------------------------------------------------------
# round points


@dataclass
class RoundPointEstimate:
    center: np.ndarray
    time: float
    residuals: np.ndarray
    relative_residual: float
    times: np.ndarray
    radii: np.ndarray
    centers: np.ndarray
    defects: np.ndarray
    fit_time: float = float("nan")

    def to_dict(self):
        return {
            "center": [float(c) for c in self.center],
            "time": self.time,
            "relative_residual": self.relative_residual,
            "residuals": self.residuals.tolist(),
            "times": self.times.tolist(),
            "radii": self.radii.tolist(),
        }


def _area(surface):
    return surface.area if isinstance(surface, TriangleMesh) else surface.area()


def detect_round_point(trajectory, *, window=(0.8, 0.98), max_states=10, max_defect=0.1, max_residual=0.05):
    """Fit the sphere law ``r(t)^2 ~ 4 (T - t)`` and ``c(t) -> x`` over the tail of a trajectory.

    The tail is the part of ``[window[0], window[1]] * t_final``; at most
    ``max_states`` evenly spread states in it get a best sphere fit.  The
    relative residual measures how far the fitted ``r(t)^2`` is from an
    affine function of ``t``.  The time ``T`` comes from the affine fit of
    the area radius ``A / (4 pi)`` over every tail state (the minimax fit
    radius is too rough to extrapolate), raised if needed to the final
    state's own estimate ``t_final + A_final / (16 pi)`` so it exceeds every
    accepted time.  The centre is the linear trend of the fitted centres at
    ``T``.

    Raises :class:`NotShrinkingToPoint` when the residual exceeds
    ``max_residual`` or the last fitted state is not round (normalized
    defect above ``max_defect``).
    """
    states = trajectory.states
    t_end = states[-1].t
    tail = [s for s in states if window[0] * t_end <= s.t <= window[1] * t_end]
    if len(tail) < 3:
        raise NotShrinkingToPoint(f"only {len(tail)} states in the tail window")
    pick = np.unique(np.linspace(0, len(tail) - 1, min(max_states, len(tail))).round().astype(int))
    times, radii, centers, defects = [], [], [], []
    for i in pick:
        s = tail[i]
        fit = best_sphere_fit(as_mesh(s.surface), grid_seeds=0, descent_starts=1, sphere_samples=1000)
        times.append(s.t)
        radii.append(fit.radius)
        centers.append(fit.center)
        defects.append(fit.normalized_defect)
    times, radii = np.array(times), np.array(radii)
    centers, defects = np.array(centers), np.array(defects)
    r2 = radii**2
    residuals = np.abs(r2 - np.polyval(np.polyfit(times, r2, 1), times))
    rel = float(np.sqrt(np.mean(residuals**2)) / np.sqrt(np.mean(r2**2)))
    if rel > max_residual:
        raise NotShrinkingToPoint(f"relative residual {rel:.3g} of the sphere law exceeds {max_residual}")
    if defects[-1] > max_defect:
        raise NotShrinkingToPoint(f"tail state is not round (normalized defect {defects[-1]:.3g})")
    tt = np.array([s.t for s in tail])
    slope, icpt = np.polyfit(tt, np.array([_area(s.surface) for s in tail]) / (4.0 * np.pi), 1)
    if slope >= 0:
        raise NotShrinkingToPoint("area is not decreasing over the tail")
    t_fit = float(-icpt / slope)
    t_hat = max(t_fit, t_end + _area(states[-1].surface) / (16.0 * np.pi))
    coef = np.polyfit(times, centers, 1)
    center = coef[0] * t_hat + coef[1]
    return RoundPointEstimate(center, float(t_hat), residuals, rel, times, radii, centers, defects, t_fit)


def rescaled_flow(trajectory, round_point):
    """States ``(Sigma_{T(1+s)} - x) / sqrt(T)`` at ``s = t / T - 1`` in ``[-1, 0)``.

    ``extras["normalized"]`` holds the unit-scale states ``(-s)^(-1/2)``
    times the rescaled ones, as ``FlowState`` objects on the same times.
    """
    if round_point.relative_residual > 0.05:
        raise NotShrinkingToPoint("round-point fit residual above 5%")
    t_hat = round_point.time
    x_hat = np.asarray(round_point.center, float)
    scale = 1.0 / np.sqrt(t_hat)
    out, normalized = [], []
    for s in trajectory.states:
        if s.t >= t_hat:
            continue
        tau = s.t / t_hat - 1.0
        surf = _transform(s.surface, x_hat, scale)
        out.append(FlowState(surf, tau, s.step))
        normalized.append(FlowState(_transform(surf, np.zeros(3), 1.0 / np.sqrt(-tau)), tau, s.step))
    diag = {k: v for k, v in trajectory.diagnostics.items()}
    return FlowTrajectory(out, diag, trajectory.stop_reason, round_point,
                          extras={"normalized": normalized, "scale": scale, "shift": x_hat})


# --------------------------------------------------------------------------
# monitors


CSV_COLUMNS = ("t", "max_A", "r", "product", "dist_H", "bound")


@dataclass
class MonitorReport:
    kind: str
    rows: list
    value: float
    applicable: bool
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "applicable": self.applicable,
                **{k: v for k, v in self.extras.items() if np.isscalar(v)}, "rows": self.rows}

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, restval="", lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: row[k] for k in CSV_COLUMNS if k in row})
        if path is not None:
            Path(path).write_text(buf.getvalue())
        return buf.getvalue()


def _sample(states, max_states):
    if max_states is None or len(states) <= max_states:
        return list(states)
    idx = np.unique(np.linspace(0, len(states) - 1, max_states).round().astype(int))
    return [states[i] for i in idx]


def _singular_time(trajectory, round_point):
    rp = round_point if round_point is not None else trajectory.round_point
    return rp.time if rp is not None else trajectory.states[-1].t


def curvature_monitor(trajectory, entropy_value, *, round_point=None, epsilon=0.01, max_states=60):
    """Largest ``|A| * r(t)`` with ``r(t) = min(sqrt(t), sqrt(T - t))`` over sampled states.

    ``applicable`` is true only when ``entropy_value <= lambda_1 - epsilon``.
    """
    t_hat = _singular_time(trajectory, round_point)
    rows = []
    for s in _sample(trajectory.states, max_states):
        if not 0.0 <= s.t < t_hat:
            continue
        a = _max_curvature(s.surface)
        r = float(np.sqrt(min(s.t, t_hat - s.t)))
        rows.append({"t": s.t, "max_A": a, "r": r, "product": a * r})
    prod = [row["product"] for row in rows]
    best = int(np.argmax(prod)) if prod else 0
    return MonitorReport("curvature", rows, float(max(prod, default=float("nan"))),
                         bool(entropy_value <= LAMBDA_1 - epsilon),
                         {"singular_time": t_hat, "argmax_t": rows[best]["t"] if rows else float("nan"),
                          "entropy": float(entropy_value)})


def speed_monitor(trajectory, *, round_point=None, entropy_value=None, epsilon=0.01, max_states=40):
    """Minimal ``L`` with ``dist_H(Sigma_0, Sigma_t) <= L g(t)`` on both time branches.

    ``g(t) = sqrt(t)`` on ``[0, T/2]`` and ``sqrt(2T) - sqrt(T - t)`` on
    ``(T/2, T)``; rows carry ``dist_H`` and the bound ``L g(t)``.
    """
    t_hat = _singular_time(trajectory, round_point)
    first = trajectory.states[0].surface
    rows = []
    for s in _sample(trajectory.states, max_states):
        if not 0.0 < s.t < t_hat:
            continue
        d, err = surface_distance(first, s.surface)
        early = s.t <= 0.5 * t_hat
        g = np.sqrt(s.t) if early else np.sqrt(2.0 * t_hat) - np.sqrt(t_hat - s.t)
        rows.append({"t": s.t, "dist_H": d, "error": err, "g": float(g), "ratio": d / g,
                     "branch": "early" if early else "late"})
    early = [r["ratio"] for r in rows if r["branch"] == "early"]
    late = [r["ratio"] for r in rows if r["branch"] == "late"]
    l_early = max(early, default=0.0)
    l_late = max(late, default=0.0)
    big_l = max(l_early, l_late)
    for r in rows:
        r["bound"] = big_l * r["g"]
    applicable = entropy_value is None or entropy_value <= LAMBDA_1 - epsilon
    return MonitorReport("speed", rows, float(big_l), bool(applicable),
                         {"L_early": float(l_early), "L_late": float(l_late), "singular_time": t_hat})


# --------------------------------------------------------------------------
# checkpoints


def write_checkpoints(trajectory, directory):
    """Numbered OFF files (profiles as x,r CSV) plus ``manifest.json``."""
    from .meshio import write_off

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, s in enumerate(trajectory.states):
        if isinstance(s.surface, AxisymProfile):
            name = f"state_{i:05d}.csv"
            np.savetxt(directory / name, np.c_[s.surface.x, s.surface.r], delimiter=",",
                       header="x,r", comments="", fmt="%.17g")
        else:
            name = f"state_{i:05d}.off"
            write_off(s.surface, directory / name)
        files.append(name)
    manifest = {
        "files": files,
        "times": [s.t for s in trajectory.states],
        "steps": [s.step for s in trajectory.states],
        "stop_reason": trajectory.stop_reason,
        "diagnostics": {k: np.asarray(v).tolist() for k, v in trajectory.diagnostics.items()},
        "round_point": trajectory.round_point.to_dict() if trajectory.round_point is not None else None,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return directory / "manifest.json"


__all__ = [
    "STOP_BLOWUP", "STOP_DEGENERACY", "STOP_HORIZON", "STOP_PINCH", "STOP_ROUND",
    "FlowState", "FlowTrajectory", "MonitorReport", "RoundPointEstimate",
    "as_mesh", "curvature_monitor", "curvature_norm_fast", "detect_round_point", "mcf_evolve",
    "mcf_step_mesh", "rescaled_flow", "speed_monitor", "surface_distance", "tangential_relax",
    "write_checkpoints",
]
