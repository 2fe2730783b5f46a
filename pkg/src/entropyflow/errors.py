"""Exception hierarchy.

Mesh validation errors carry the offending simplex so callers can report it.
"""


class EntropyFlowError(Exception):
    """Base class for all errors raised by the package."""


class MeshError(EntropyFlowError, ValueError):
    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = simplex


class NonManifoldEdge(MeshError):
    pass


class OpenBoundary(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class Disconnected(MeshError):
    pass


class NonOrientable(MeshError):
    pass


class DuplicateVertex(MeshError):
    pass


class NumericalDegeneracy(EntropyFlowError):
    pass


class InsufficientNeighborhood(EntropyFlowError):
    pass


class InvalidParameter(EntropyFlowError, ValueError):
    pass


class QuadratureNotConverged(EntropyFlowError):
    pass


class NoConvergence(EntropyFlowError):
    """Raised only when the caller asks for strict convergence.

    ``result`` holds the best value found anyway.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnsupportedIndex(EntropyFlowError, ValueError):
    pass


class SolveFailure(EntropyFlowError):
    pass


class QualityCollapse(EntropyFlowError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NeckPinch(EntropyFlowError):
    def __init__(self, message, profile=None, time=None):
        super().__init__(message)
        self.profile = profile
        self.time = time


class CapDegeneracy(EntropyFlowError):
    pass


class NotShrinkingToPoint(EntropyFlowError):
    pass


class InsufficientStates(EntropyFlowError):
    pass


class NotSimple(EntropyFlowError, ValueError):
    pass
