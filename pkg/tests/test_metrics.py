import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropyflow import (
    best_sphere_fit,
    entropy,
    hausdorff_distance,
    log_log_slope,
    monotonicity_defect,
    rigidity_defect,
)
from entropyflow.metrics import LAMBDA_2, MeshDistance, hausdorff_to_sphere, point_triangle_distance
from entropyflow.shapes import ellipsoid, sphere

from conftest import exact_shrinking_sphere


def spacing(mesh):
    return 0.5 * mesh.edge_lengths.mean()


# --------------------------------------------------------------------------
# point-triangle distance against dense barycentric sampling


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=12, max_size=12))
def test_point_triangle_distance_matches_brute_force(coords):
    p, a, b, c = np.array(coords).reshape(4, 3)
    if np.linalg.norm(np.cross(b - a, c - a)) < 1e-2:
        return
    d = point_triangle_distance(p[None], a[None], b[None], c[None])[0]
    k = 200
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    ok = i + j <= k
    u, v = i[ok] / k, j[ok] / k
    pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    brute = np.linalg.norm(pts - p, axis=1).min()
    # the brute minimum overestimates by at most the grid's covering radius
    h = max(np.linalg.norm(b - a), np.linalg.norm(c - a), np.linalg.norm(c - b)) / k
    assert d <= brute + 1e-12
    assert brute - d <= h


def test_bracket_contains_exact_distance():
    m = ellipsoid(1.5, 1.0, 0.8, level=3)
    q = np.random.default_rng(0).normal(scale=2.0, size=(300, 3))
    dist = MeshDistance(m)
    up, lo = dist.bracket(q)
    exact = np.array([dist.exact(p) for p in q])
    c = m.corners
    for p, e in zip(q[:20], exact[:20]):
        full = point_triangle_distance(np.broadcast_to(p, (len(c), 3)), c[:, 0], c[:, 1], c[:, 2]).min()
        assert e == pytest.approx(full, abs=1e-12)
    assert np.all(lo <= exact + 1e-12) and np.all(exact <= up + 1e-12)


# --------------------------------------------------------------------------
# Hausdorff distance


@pytest.fixture(scope="module")
def spheres():
    return sphere(1.0, level=4), sphere(2.0, level=4), sphere(1.0, center=(3.0, 0.0, 0.0), level=4)


def test_identical_meshes(spheres):
    a = spheres[0]
    assert hausdorff_distance(a, a) == (0.0, 0.0)
    assert hausdorff_distance(a, a.with_vertices(a.vertices.copy())) == (0.0, 0.0)


def test_concentric_spheres(spheres):
    a, b, _ = spheres
    value, bound = hausdorff_distance(a, b)
    assert abs(value - 1.0) <= bound
    assert bound <= max(spacing(a), spacing(b)) / 2


def test_separated_spheres(spheres):
    a, _, c = spheres
    value, bound = hausdorff_distance(a, c)
    assert abs(value - 3.0) <= bound
    assert bound <= max(spacing(a), spacing(c)) / 2


def test_symmetry(spheres):
    a, b, c = spheres
    for x, y in ((a, b), (a, c), (b, c)):
        assert hausdorff_distance(x, y)[0] == pytest.approx(hausdorff_distance(y, x)[0], abs=1e-12)


def test_parts():
    a, b = sphere(1.0, level=3), ellipsoid(1.5, 1.0, 1.0, level=3)
    value, _, (ab, ba) = hausdorff_distance(a, b, return_parts=True)
    assert value == max(ab, ba)
    # the farthest point of the ellipsoid is its tip at distance 0.5
    assert ba == pytest.approx(0.5, abs=spacing(b))


def test_triangle_inequality():
    corpus = [sphere(1.0, level=3), sphere(1.4, center=(0.3, 0.0, 0.0), level=3),
              ellipsoid(1.5, 1.0, 1.0, level=3), ellipsoid(1.0, 0.7, 1.2, level=3)]
    d = {}
    for i, x in enumerate(corpus):
        for j, y in enumerate(corpus):
            d[i, j] = hausdorff_distance(x, y)
    for i in range(4):
        for j in range(4):
            for k in range(4):
                slack = 2 * max(d[i, j][1], d[j, k][1], d[i, k][1])
                assert d[i, k][0] <= d[i, j][0] + d[j, k][0] + slack


@pytest.mark.parametrize("s", [0.25, 3.7])
def test_scale_equivariance(s):
    a, b = sphere(1.0, level=3), ellipsoid(1.5, 1.0, 0.9, level=3)
    base = hausdorff_distance(a, b)[0]
    scaled = hausdorff_distance(a.transformed(scale=s), b.transformed(scale=s))[0]
    assert scaled == pytest.approx(s * base, rel=1e-10)


# --------------------------------------------------------------------------
# sphere fits


def test_fit_of_offset_sphere():
    fit = best_sphere_fit(sphere(2.0, center=(1.0, 0.0, 0.0), level=4))
    assert np.allclose(fit.center, [1, 0, 0], atol=1e-2)
    assert fit.radius == pytest.approx(2.0, abs=1e-2)
    assert fit.normalized_defect <= 5e-3


@pytest.fixture(scope="module")
def ellipsoid_fit():
    m = ellipsoid(2.0, 1.0, 1.0, level=4)
    return m, best_sphere_fit(m)


def test_fit_of_ellipsoid(ellipsoid_fit):
    _, fit = ellipsoid_fit
    assert np.linalg.norm(fit.center) < 2e-2
    assert fit.radius == pytest.approx(1.5, abs=2e-2)
    assert fit.defect == pytest.approx(0.5, abs=1e-2)


def test_fit_against_grid_oracle(ellipsoid_fit):
    m, fit = ellipsoid_fit
    best = np.inf
    for cx in np.linspace(-0.2, 0.2, 9):
        for r in np.linspace(1.3, 1.7, 41):
            best = min(best, hausdorff_to_sphere(m, (cx, 0.0, 0.0), r) / r)
    assert fit.normalized_defect <= best + 1e-3


def test_fit_defect_is_the_hausdorff_distance(ellipsoid_fit):
    m, fit = ellipsoid_fit
    assert fit.defect >= 0 and fit.normalized_defect >= 0
    assert hausdorff_to_sphere(m, fit.center, fit.radius) == pytest.approx(fit.defect, abs=1e-8)
    # and agrees with the mesh-to-mesh distance to a fine sphere up to its bound and chord sag
    round_mesh = sphere(fit.radius, center=fit.center, level=5)
    value, bound = hausdorff_distance(m, round_mesh)
    sag = round_mesh.edge_lengths.max() ** 2 / (8 * fit.radius)
    assert abs(value - fit.defect) <= bound + sag + 1e-3


def test_fit_is_deterministic():
    m = ellipsoid(1.3, 1.0, 0.9, level=3)
    a, b = best_sphere_fit(m), best_sphere_fit(m)
    assert np.array_equal(a.center, b.center) and a.radius == b.radius


def test_fit_json():
    d = best_sphere_fit(sphere(1.0, level=3)).to_dict()
    assert set(d) == {"center", "radius", "defect", "normalized_defect"}


# --------------------------------------------------------------------------
# rigidity


def test_rigidity_of_the_round_sphere():
    rep = rigidity_defect(sphere(1.0, level=5))
    assert -2e-3 <= rep.delta <= 2e-3
    assert 0 <= rep.distance <= 5e-3
    assert rep.ratio == pytest.approx(rep.distance / max(rep.delta, rep.delta_floor) ** 0.125)
    d = json.loads(rep.to_json())
    assert set(d) >= {"delta", "distance", "ratio", "fit", "floors", "uncertainties"}
    assert set(d["fit"]) == {"center", "radius"}


def test_floor_is_applied():
    m = sphere(1.0, level=3)
    res = entropy(m)
    rep = rigidity_defect(m, entropy_result=res, reference=res.value + 1.0)
    assert rep.floored and rep.delta < 0
    assert rep.ratio == pytest.approx(rep.distance / rep.delta_floor ** 0.125)


@pytest.fixture(scope="module")
def ellipsoid_family():
    return [rigidity_defect(ellipsoid(1 + e, 1.0, 1.0, level=3)) for e in (0.05, 0.1, 0.2, 0.4)]


def test_ellipsoid_family_is_monotone(ellipsoid_family):
    deltas = [r.delta for r in ellipsoid_family]
    dists = [r.distance for r in ellipsoid_family]
    assert np.all(np.diff(deltas) > 0)
    assert np.all(np.diff(dists) > 0)
    ratios = np.array([r.ratio for r in ellipsoid_family])
    assert np.all(np.isfinite(ratios)) and ratios.max() < 1.0


def test_log_log_slope():
    x = np.array([1e-3, 1e-2, 1e-1])
    assert log_log_slope(x, 3 * x**0.5) == pytest.approx(0.5)
    assert np.isnan(log_log_slope([1e-3, -1.0], [1.0, 2.0]))


# --------------------------------------------------------------------------
# monotonicity defect


def test_monotonicity_defect_on_the_exact_sphere():
    traj = exact_shrinking_sphere(np.linspace(-1.0, -0.5, 11))
    assert 0 <= monotonicity_defect(traj) <= 1e-4


def test_monotonicity_defect_on_the_ellipsoid(ellipsoid_rescaled):
    delta = entropy(ellipsoid(1.2, 1.0, 1.0, level=3)).value - LAMBDA_2
    value = monotonicity_defect(ellipsoid_rescaled)
    assert 0 < value <= delta + 5e-3


def test_monotonicity_defect_outside_window_is_zero():
    traj = exact_shrinking_sphere([-0.2, -0.1])
    assert monotonicity_defect(traj) == 0.0
