"""Shared trajectories; each is computed once per session."""

import numpy as np
import pytest

from entropyflow import AxisymProfile, FlowState, FlowTrajectory, mcf_evolve, rescaled_flow
from entropyflow.shapes import ellipsoid, sphere


@pytest.fixture(scope="session")
def sphere_flow():
    """Mesh flow of the radius-2 sphere centred at (1, 1, 1), run to its round point."""
    return mcf_evolve(sphere(2.0, center=(1.0, 1.0, 1.0), level=3))


@pytest.fixture(scope="session")
def ellipsoid_flow():
    """Mesh flow of the ellipsoid (1.2, 1, 1), run to its round point."""
    return mcf_evolve(ellipsoid(1.2, 1.0, 1.0, level=3))


@pytest.fixture(scope="session")
def ellipsoid_rescaled(ellipsoid_flow):
    return rescaled_flow(ellipsoid_flow, ellipsoid_flow.round_point)


@pytest.fixture(scope="session")
def axisym_sphere_flow():
    return mcf_evolve(AxisymProfile.sphere(2.0, n=200))


def exact_shrinking_sphere(times, level=4):
    """The self-similar flow sqrt(-4t) S^2 sampled at ``times`` (all negative)."""
    base = sphere(1.0, level=level)
    states = [FlowState(base.with_vertices(base.vertices * np.sqrt(-4.0 * t)), float(t), i)
              for i, t in enumerate(times)]
    return FlowTrajectory(states, {}, "exact")
