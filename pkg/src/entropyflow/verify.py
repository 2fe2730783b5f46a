"""Quick self-check suites behind ``entropyflow verify``.

Each suite returns a list of :class:`Check` rows; they are small enough to
run in seconds to a minute on one core.
"""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class Check:
    name: str
    value: float
    expected: float
    tolerance: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def _check(name, value, expected, tol, relative=False):
    err = abs(value - expected) / (abs(expected) if relative else 1.0)
    return Check(name, float(value), float(expected), float(tol), bool(err <= tol))


def lambda_table():
    from .shrinker import LambdaTable, lambda_reference

    chain = LambdaTable.build().chain_holds()
    return [
        _check("lambda_1", lambda_reference(1), np.sqrt(2.0 * np.pi / np.e), 1e-6),
        _check("lambda_2", lambda_reference(2), 4.0 / np.e, 1e-6),
        Check("lambda chain", float(chain), 1.0, 0.0, bool(chain)),
    ]


def sphere_entropy():
    from .gaussian import entropy
    from .shapes import sphere

    res = entropy(sphere(1.0, level=4))
    return [
        _check("entropy", res.value, 4.0 / np.e, 3e-3),
        _check("argmax |y|", float(np.linalg.norm(res.argmax.y)), 0.0, 1e-2),
        _check("argmax rho", res.argmax.rho, 2.0, 2e-2),
    ]


def shrinker():
    from .shapes import sphere
    from .shrinker import phi, shrinker_residual

    m = sphere(2.0, level=4)
    return [
        _check("sphere(2) residual", shrinker_residual(m).max_residual, 0.0, 0.02),
        _check("phi(sphere(2), -1)", float(np.abs(phi(m, -1.0)).max()), 0.0, 0.02),
    ]


def sphere_flow():
    from .axisym import AxisymProfile
    from .flow import mcf_evolve
    from .shapes import sphere

    mesh = mcf_evolve(sphere(2.0, level=3), horizon=0.9, detect=False)
    err = max(abs(np.sqrt(np.mean(np.sum(s.surface.vertices**2, axis=1))) / np.sqrt(4 - 4 * s.t) - 1)
              for s in mesh.states)
    prof = mcf_evolve(AxisymProfile.sphere(2.0, n=200), horizon=0.9, detect=False)
    perr = max(abs(np.mean(np.hypot(s.surface.x, s.surface.r)) / np.sqrt(4 - 4 * s.t) - 1) for s in prof.states)
    return [_check("mesh radius law", err, 0.0, 1e-2), _check("profile radius law", perr, 0.0, 1e-4)]


def cylinder_flow():
    from .axisym import AxisymProfile
    from .flow import mcf_evolve

    traj = mcf_evolve(AxisymProfile.cylinder(2.0, period=2.0, n=64), horizon=1.0, dt=1e-3, detect=False)
    err = max(abs(np.mean(s.surface.r) / np.sqrt(4 - 2 * s.t) - 1) for s in traj.states)
    return [_check("cylinder radius law", err, 0.0, 1e-4)]


def bonnesen():
    from .bonnesen import PlanarCurve, bonnesen_check

    c = bonnesen_check(PlanarCurve.circle(n=2048))
    e = bonnesen_check(PlanarCurve.ellipse(2.0, 1.0))
    s = bonnesen_check(PlanarCurve.square(2.0))
    return [
        _check("circle rhs - lhs", c.rhs - c.lhs, 0.0, 1e-4),
        _check("ellipse lhs", e.lhs, np.pi**2, 1e-3, relative=True),
        _check("ellipse rhs", e.rhs, 9.6884482205**2 - 8 * np.pi**2, 1e-3, relative=True),
        _check("square lhs", s.lhs, np.pi**2 * (np.sqrt(2) - 1) ** 2, 1e-3, relative=True),
        _check("square rhs", s.rhs, 64 - 16 * np.pi, 1e-3, relative=True),
    ]


SUITES = {
    "lambda-table": lambda_table,
    "sphere-entropy": sphere_entropy,
    "shrinker": shrinker,
    "sphere-flow": sphere_flow,
    "cylinder-flow": cylinder_flow,
    "bonnesen": bonnesen,
}


def run_suite(name):
    """Run one suite (or ``"all"``) and return ``{suite: [Check, ...]}``."""
    names = list(SUITES) if name == "all" else [name]
    return {n: SUITES[n]() for n in names}
