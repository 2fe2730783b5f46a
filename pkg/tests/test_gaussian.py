import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from entropyflow import GaussianFrame, entropy, entropy_grid_oracle, gaussian_area
from entropyflow.errors import InvalidParameter
from entropyflow.gaussian import gaussian_area_gradient
from entropyflow.shapes import capped_cylinder, ellipsoid, sphere


def sphere_gaussian_area(radius, offset):
    """Closed form of F for a round sphere whose centre sits ``offset`` from the origin."""
    if offset == 0:
        return radius**2 * np.exp(-radius**2 / 4)
    q = radius * offset / 2
    return radius**2 * np.exp(-(radius**2 + offset**2) / 4) * np.sinh(q) / q


@pytest.fixture(scope="module")
def unit_sphere():
    return sphere(1.0, level=4)


def test_frame_validation():
    with pytest.raises(InvalidParameter):
        GaussianFrame((0, 0, 0), 0.0)
    with pytest.raises(InvalidParameter):
        GaussianFrame((0, np.inf, 0), 1.0)
    f = GaussianFrame.centered_at((1.0, 2.0, 3.0), 2.0)
    assert np.allclose(f.center, [1, 2, 3])


@pytest.mark.parametrize("rho,expected", [(1.0, np.exp(-0.25)), (2.0, 4 / np.e)])
def test_sphere_gaussian_area(unit_sphere, rho, expected):
    assert gaussian_area(unit_sphere, ((0, 0, 0), rho)) == pytest.approx(expected, abs=1e-3)


def test_far_scale_vanishes(unit_sphere):
    assert gaussian_area(unit_sphere, ((0, 0, 0), 100.0)) < 1e-100


@pytest.mark.parametrize("y", [(0.5, 0, 0), (0, 1.0, 0.5), (2.0, -1.0, 1.0)])
def test_translated_frame_closed_form(unit_sphere, y):
    rho = 1.7
    expected = sphere_gaussian_area(rho, np.linalg.norm(y))
    assert gaussian_area(unit_sphere, (y, rho)) == pytest.approx(expected, rel=2e-3)


def test_tube_contribution_is_lambda_1():
    m = capped_cylinder(np.sqrt(2), 40.0, level=5)
    x = m.corners[:, :, 0].mean(axis=1)
    # the straight part is centred on the origin
    mid = 0.5 * (m.vertices[:, 0].min() + m.vertices[:, 0].max())
    assert abs(mid) < 1e-9
    tube = np.abs(x) < 15.0
    assert gaussian_area(m, face_mask=tube) == pytest.approx(np.sqrt(2 * np.pi / np.e), abs=2e-3)


def test_gradient_at_the_maximizing_scale(unit_sphere):
    d_y, d_rho = gaussian_area_gradient(unit_sphere, ((0, 0, 0), 2.0))
    assert np.linalg.norm(d_y) < 1e-6
    # the residual slope is the polyhedral area deficit; it falls 4x per level
    _, d_rho_fine = gaussian_area_gradient(sphere(1.0, level=5), ((0, 0, 0), 2.0))
    assert abs(d_rho_fine) < 1e-3
    assert abs(d_rho / d_rho_fine) > 3.5


def test_gradient_at_unit_scale(unit_sphere):
    d_y, d_rho = gaussian_area_gradient(unit_sphere, ((0, 0, 0), 1.0))
    assert np.linalg.norm(d_y) < 1e-6
    assert d_rho == pytest.approx(1.5 * np.exp(-0.25), abs=2e-3)


def test_gradient_matches_finite_differences():
    m = ellipsoid(1.5, 1.0, 0.7, level=3)
    y, rho, h = np.array([0.3, -0.2, 0.1]), 1.3, 1e-5
    d_y, d_rho = gaussian_area_gradient(m, (y, rho), refine=2)

    def f(yy, rr):
        return gaussian_area(m, (yy, rr), refine=2)

    fd_y = [(f(y + h * e, rho) - f(y - h * e, rho)) / (2 * h) for e in np.eye(3)]
    fd_rho = (f(y, rho + h) - f(y, rho - h)) / (2 * h)
    assert np.allclose(d_y, fd_y, rtol=1e-4, atol=1e-8)
    assert d_rho == pytest.approx(fd_rho, rel=1e-4)


def test_entropy_of_unit_sphere(unit_sphere):
    res = entropy(unit_sphere)
    assert res.value == pytest.approx(4 / np.e, abs=3e-3)
    assert np.linalg.norm(res.argmax.y) < 1e-2
    assert res.argmax.rho == pytest.approx(2.0, abs=2e-2)
    assert res.converged and not res.on_boundary
    # the value is at least every probed frame
    assert res.value >= res.max_probed - 1e-6
    assert res.value >= 1.0


def test_entropy_ignores_translation():
    a = entropy(sphere(1.0, level=4))
    b = entropy(sphere(1.0, center=(7.0, 0.0, 0.0), level=4))
    assert b.value == pytest.approx(a.value, abs=1e-6)


def test_ellipsoid_entropy_matches_oracle():
    m = ellipsoid(2, 1, 1, level=4)
    res = entropy(m, oracle=True)
    assert res.value > 1.4716
    assert abs(res.oracle_gap) <= 1e-3
    assert res.value >= res.value - res.oracle_gap - 1e-3


def test_oracle_on_unit_sphere(unit_sphere):
    assert entropy_grid_oracle(unit_sphere) == pytest.approx(4 / np.e, abs=5e-3)


def test_oracle_refinement_is_monotone():
    m = ellipsoid(1.5, 1, 1, level=3)
    coarse = entropy_grid_oracle(m, centers_per_axis=5, n_rho=9, anchored=False, zoom=False)
    fine = entropy_grid_oracle(m, centers_per_axis=9, n_rho=17, anchored=False, zoom=False)
    assert fine >= coarse


def test_rotation_invariance():
    m = ellipsoid(1.5, 1.0, 0.8, level=3)
    rot = Rotation.from_euler("xyz", [0.3, -1.1, 2.0]).as_matrix()
    a = entropy(m).value
    b = entropy(m.transformed(rotation=rot)).value
    assert b == pytest.approx(a, abs=1e-6)


_ELL = ellipsoid(1.5, 1.0, 1.0, level=3)
_ELL_VALUE = entropy(_ELL).value


@settings(max_examples=4, deadline=None)
@given(
    shift=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    scale=st.floats(0.3, 4.0),
)
def test_entropy_frame_invariance(shift, scale):
    moved = _ELL.transformed(translation=shift, scale=scale)
    assert abs(entropy(moved).value - _ELL_VALUE) <= 1e-4


@settings(max_examples=10, deadline=None)
@given(
    y=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3),
    log_rho=st.floats(np.log(0.3), np.log(6.0)),
)
def test_gaussian_area_below_entropy(y, log_rho):
    assert gaussian_area(_ELL, (y, np.exp(log_rho))) <= _ELL_VALUE + 1e-6


def test_result_json_fields(unit_sphere):
    d = json.loads(entropy(unit_sphere, grid_starts=1).to_json())
    for key in ("value", "center", "scale", "converged", "starts_tried", "gradient_norm", "oracle_gap"):
        assert key in d
