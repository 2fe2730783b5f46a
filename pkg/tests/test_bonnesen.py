import json

import numpy as np
import pytest
from scipy.integrate import quad

from entropyflow import PlanarCurve, bonnesen_check, curve_quantities
from entropyflow.errors import InvalidParameter, NotSimple


def ellipse_length(a, b):
    return quad(lambda t: np.hypot(a * np.sin(t), b * np.cos(t)), 0, 2 * np.pi, epsabs=1e-13, limit=200)[0]


def test_circle_quantities():
    q = curve_quantities(PlanarCurve.circle(n=1024))
    assert q.length == pytest.approx(2 * np.pi, abs=1e-4)
    assert q.area == pytest.approx(np.pi, abs=1e-4)
    assert q.inradius == pytest.approx(1.0, abs=1e-4)
    assert q.circumradius == pytest.approx(1.0, abs=1e-4)


def test_ellipse_quantities():
    q = curve_quantities(PlanarCurve.ellipse(2.0, 1.0))
    assert ellipse_length(2, 1) == pytest.approx(9.6884, abs=1e-4)
    assert q.length == pytest.approx(ellipse_length(2, 1), rel=1e-5)
    assert q.area == pytest.approx(2 * np.pi, rel=1e-5)
    assert q.circumradius == pytest.approx(2.0, abs=1e-9)
    assert q.inradius == pytest.approx(1.0, abs=1e-5)


def test_square_quantities():
    q = curve_quantities(PlanarCurve.square(2.0))
    assert q.length == pytest.approx(8.0, abs=1e-12)
    assert q.area == pytest.approx(4.0, abs=1e-12)
    assert q.circumradius == pytest.approx(np.sqrt(2), abs=1e-9)
    assert q.inradius == pytest.approx(1.0, abs=1e-6)


def test_circle_is_the_equality_case():
    lhs, rhs, holds = bonnesen_check(PlanarCurve.circle())
    assert holds
    assert lhs == pytest.approx(0.0, abs=1e-8)
    assert abs(rhs - lhs) <= 1e-4


def test_ellipse_and_square():
    lhs, rhs, holds = bonnesen_check(PlanarCurve.ellipse(2.0, 1.0))
    assert holds
    assert lhs == pytest.approx(np.pi**2, rel=1e-3)
    assert rhs == pytest.approx(ellipse_length(2, 1) ** 2 - 8 * np.pi**2, rel=1e-3)
    lhs, rhs, holds = bonnesen_check(PlanarCurve.square(2.0))
    assert holds
    assert lhs == pytest.approx(np.pi**2 * (np.sqrt(2) - 1) ** 2, rel=1e-3)
    assert rhs == pytest.approx(64 - 16 * np.pi, rel=1e-3)


def test_self_intersection_is_rejected():
    bowtie = PlanarCurve([[0, 0], [1, 1], [1, 0], [0, 1]])
    with pytest.raises(NotSimple):
        curve_quantities(bowtie)
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    with pytest.raises(NotSimple):
        bonnesen_check(PlanarCurve(np.c_[np.sin(2 * t), np.sin(t)]))


def test_invalid_curves():
    with pytest.raises(InvalidParameter):
        PlanarCurve([[0, 0], [1, 0]])
    with pytest.raises(InvalidParameter):
        PlanarCurve([[0, 0], [1, 0], [np.nan, 1]])


def test_orientation_is_normalised():
    pts = PlanarCurve.square().points
    assert curve_quantities(PlanarCurve(pts[::-1])).area == pytest.approx(4.0)


@pytest.mark.parametrize("s", [0.1, 3.0])
def test_similarity_covariance(s):
    c = PlanarCurve.ellipse(1.5, 1.0, n=512)
    a, b = bonnesen_check(c), bonnesen_check(c.scaled(s))
    qa, qb = a.quantities, b.quantities
    assert qb.length == pytest.approx(s * qa.length, rel=1e-10)
    assert qb.area == pytest.approx(s**2 * qa.area, rel=1e-10)
    assert qb.circumradius == pytest.approx(s * qa.circumradius, rel=1e-9)
    assert qb.inradius == pytest.approx(s * qa.inradius, rel=1e-6)
    assert b.lhs == pytest.approx(s**2 * a.lhs, rel=1e-5)
    assert b.rhs == pytest.approx(s**2 * a.rhs, rel=1e-9)
    assert a.holds == b.holds


def test_gap_closes_towards_the_circle():
    gaps = [bonnesen_check(PlanarCurve.ellipse(1.0, b)) for b in (0.5, 0.7, 0.9, 0.95, 0.99)]
    slack = np.array([r.rhs - r.lhs for r in gaps])
    assert np.all(slack > 0)
    assert np.all(np.diff(slack) < 0)
    assert slack[-1] < 1e-3


def test_sampling_convergence():
    exact_length = ellipse_length(2, 1)
    errs = []
    for n in (128, 256, 512):
        q = curve_quantities(PlanarCurve.ellipse(2.0, 1.0, n=n))
        errs.append((abs(q.length - exact_length), abs(q.area - 2 * np.pi)))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.9), orders


def test_csv_round_trip(tmp_path):
    path = tmp_path / "curve.csv"
    c = PlanarCurve.ellipse(2.0, 1.0, n=256)
    np.savetxt(path, c.points, delimiter=",", header="x,y", comments="")
    assert np.allclose(PlanarCurve.from_csv(path).points, c.points)
    np.savetxt(path, c.points, delimiter=",")
    assert np.allclose(PlanarCurve.from_csv(path).points, c.points)
    np.savetxt(path, np.c_[c.points, c.points[:, 0]], delimiter=",")
    with pytest.raises(InvalidParameter):
        PlanarCurve.from_csv(path)


def test_json():
    d = json.loads(bonnesen_check(PlanarCurve.square()).to_json())
    assert {"lhs", "rhs", "holds", "length", "area", "inradius", "circumradius"} <= set(d)
