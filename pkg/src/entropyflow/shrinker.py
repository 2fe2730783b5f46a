"""Self-shrinker residuals, the quantity ``phi = 2 t H + x.n`` and reference entropies.

A surface is a self-shrinker when ``Hvec + x_perp / 2 = 0``; with the
outward normal and ``Hvec = -H n`` this reads ``H = x.n / 2``, so the
round sphere of radius 2 and the cylinder of radius sqrt(2) qualify.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .errors import UnsupportedIndex
from .mesh import mean_curvature_vector, mixed_areas, outward_normals


@dataclass
class ShrinkerReport:
    residual_field: np.ndarray
    signed: np.ndarray
    max_residual: float
    l2_residual: float
    tangential: np.ndarray = None

    def to_dict(self, per_vertex=False):
        out = {"max": self.max_residual, "l2": self.l2_residual}
        if self.tangential is not None:
            out["max_tangential"] = float(self.tangential.max())
        if per_vertex:
            out["per_vertex"] = self.residual_field.tolist()
        return out

    def to_json(self, per_vertex=False, **kw):
        return json.dumps(self.to_dict(per_vertex), **kw)


def shrinker_residual(mesh):
    """Per-vertex ``|Hvec + (x.n / 2) n|`` with ``Hvec = -H n``, plus its area-weighted RMS.

    The smooth mean curvature vector is normal, so the discrete one enters
    through its normal component ``H``.  The tangential part of the
    cotangent Laplacian (first order on irregular vertices) is kept apart
    in ``tangential`` as a mesh-quality diagnostic.  ``signed`` is
    ``x.n / 2 - H``.
    """
    hvec = mean_curvature_vector(mesh)
    n = outward_normals(mesh)
    h = -np.einsum("ij,ij->i", hvec, n)
    xn = np.einsum("ij,ij->i", mesh.vertices, n)
    signed = 0.5 * xn - h
    field = np.abs(signed)
    area = mixed_areas(mesh)
    l2 = float(np.sqrt((area * field**2).sum() / area.sum()))
    tangential = np.linalg.norm(hvec + h[:, None] * n, axis=1)
    return ShrinkerReport(field, signed, float(field.max()), l2, tangential)


def phi(mesh, t):
    """``2 t H + x.n`` per vertex (``H = 2/R`` on a sphere of radius ``R``)."""
    hvec = mean_curvature_vector(mesh)
    n = outward_normals(mesh)
    h = -np.einsum("ij,ij->i", hvec, n)
    return 2.0 * t * h + np.einsum("ij,ij->i", mesh.vertices, n)


def _lambda_closed_form(k):
    # Gaussian area of the round k-sphere of radius sqrt(2k)
    area = 2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)
    return float((4.0 * np.pi) ** (-k / 2.0) * area * (2.0 * k) ** (k / 2.0) * np.exp(-k / 2.0))


def lambda_reference(k):
    """Entropy of the round ``k``-sphere, for ``k`` in {1, 2}."""
    if k == 1:
        return float(np.sqrt(2.0 * np.pi / np.e))
    if k == 2:
        return float(4.0 / np.e)
    raise UnsupportedIndex(f"only k = 1, 2 are available for surfaces in R^3, got {k}")


@dataclass
class LambdaTable:
    """Reference entropies ``lambda_1 .. lambda_kmax`` of round spheres."""

    values: dict

    @classmethod
    def build(cls, kmax=8):
        return cls({k: _lambda_closed_form(k) for k in range(1, kmax + 1)})

    def chain_holds(self):
        """``2 > lambda_1 > 3/2 > lambda_2 > lambda_3 > ... > sqrt(2)``."""
        seq = [self.values[k] for k in sorted(self.values)]
        decreasing = all(a > b for a, b in zip(seq, seq[1:]))
        return bool(2.0 > seq[0] > 1.5 > seq[1] and decreasing and seq[-1] > np.sqrt(2.0))
