import json

import numpy as np
import pytest
from scipy.integrate import quad

from entropyflow import LambdaTable, gaussian_area, lambda_reference, phi, shrinker_residual
from entropyflow.errors import UnsupportedIndex
from entropyflow.gaussian import entropy
from entropyflow.shapes import capped_cylinder, ellipsoid, sphere


def test_lambda_values_against_quadrature():
    # F of sqrt(2) S^1 x R and of 2 S^2 by direct integration of the Gaussian weight
    lam1 = (4 * np.pi) ** -1 * 2 * np.pi * np.sqrt(2) * np.exp(-0.5) * quad(lambda z: np.exp(-z * z / 4), -np.inf, np.inf)[0]
    lam2 = (4 * np.pi) ** -1 * 4 * np.pi * 4 * np.exp(-1.0)
    assert lambda_reference(1) == pytest.approx(lam1, abs=1e-9)
    assert lambda_reference(2) == pytest.approx(lam2, abs=1e-12)
    assert lambda_reference(2) == pytest.approx(1.471518, abs=1e-6)


def test_lambda_chain():
    table = LambdaTable.build(kmax=8)
    assert table.chain_holds()
    assert 2 > lambda_reference(1) > 1.5 > lambda_reference(2) > np.sqrt(2)
    assert table.values[1] == pytest.approx(lambda_reference(1), abs=1e-12)


def test_unsupported_index():
    with pytest.raises(UnsupportedIndex):
        lambda_reference(3)


def test_sphere_of_radius_two_is_a_shrinker():
    rep = shrinker_residual(sphere(2.0, level=5))
    assert rep.max_residual <= 0.02
    assert rep.max_residual >= rep.l2_residual >= 0


def test_residual_under_refinement():
    # on inscribed spheres the normal component is exact, so the residual is round-off
    errs = [shrinker_residual(sphere(2.0, level=l)).max_residual for l in (3, 4, 5)]
    assert max(errs) < 1e-10
    # where it is not exact it converges at second order
    errs = []
    for level in (4, 5, 6):
        m = capped_cylinder(np.sqrt(2), 20.0, level=level)
        errs.append(shrinker_residual(m).residual_field[np.abs(m.vertices[:, 0]) < 5].max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.5), orders


def test_tangential_part_is_first_order():
    # the cotangent Laplacian's tangential error halves per level on the icosphere
    tang = [shrinker_residual(sphere(2.0, level=l)).tangential.max() for l in (3, 4, 5)]
    assert tang[-1] < 0.02
    assert np.allclose(np.array(tang[:-1]) / np.array(tang[1:]), 2.0, rtol=0.05)


@pytest.mark.parametrize("radius", [1.0, 2.0, 4.0])
def test_residual_of_spheres(radius):
    # |R/2 - 2/R| on a sphere of radius R
    expected = abs(radius / 2 - 2 / radius)
    rep = shrinker_residual(sphere(radius, level=5))
    if expected == 0:
        assert rep.max_residual < 0.02
    else:
        assert np.allclose(rep.residual_field, expected, rtol=2e-2)


def test_cylinder_mid_tube():
    m = capped_cylinder(np.sqrt(2), 20.0, level=5)
    mid = np.abs(m.vertices[:, 0]) < 5.0
    assert shrinker_residual(m).residual_field[mid].max() <= 0.03


def test_phi_on_shrinking_spheres():
    assert np.abs(phi(sphere(2.0, level=5), -1.0)).max() <= 0.02
    assert np.abs(phi(sphere(np.sqrt(2), level=5), -0.5)).max() <= 0.02
    assert np.allclose(phi(sphere(2.0, level=5), 0.0), 2.0, atol=1e-3)


def test_phi_is_twice_the_signed_residual():
    m = ellipsoid(2.0, 1.2, 0.9, level=3)
    rep = shrinker_residual(m)
    assert np.allclose(phi(m, -1.0), 2 * rep.signed, atol=1e-10)
    assert np.abs(phi(m, -1.0)).max() <= 2 * rep.max_residual + 1e-10


def test_shrinker_entropy_is_attained_at_identity():
    m = sphere(2.0, level=5)
    assert abs(entropy(m).value - gaussian_area(m)) <= 2e-3


def test_report_json():
    rep = shrinker_residual(sphere(2.0, level=2))
    d = json.loads(rep.to_json(per_vertex=True))
    assert set(d) == {"max", "l2", "max_tangential", "per_vertex"}
    assert len(d["per_vertex"]) == 162
