"""Gaussian entropy, mean curvature flow and roundness defects of closed surfaces."""

from .axisym import AxisymProfile, FlowState, FlowTrajectory, axisym_evolve, mcf_step_axisym, smoczyk_check
from .bonnesen import CurveQuantities, PlanarCurve, bonnesen_check, curve_quantities
from .errors import *  # noqa: F401,F403
from .flow import (
    MonitorReport,
    RoundPointEstimate,
    curvature_monitor,
    detect_round_point,
    mcf_evolve,
    mcf_step_mesh,
    rescaled_flow,
    speed_monitor,
    write_checkpoints,
)
from .gaussian import EntropyResult, GaussianFrame, entropy, entropy_grid_oracle, gaussian_area
from .mesh import (
    TriangleMesh,
    build_mesh,
    cotangent_laplacian,
    mean_curvature,
    mean_curvature_vector,
    mixed_areas,
    outward_normals,
    principal_curvatures,
    second_fundamental_norm,
)
from .meshio import read_mesh, write_mesh
from .metrics import (
    RigidityReport,
    SphereFit,
    best_sphere_fit,
    hausdorff_distance,
    log_log_slope,
    monotonicity_defect,
    rigidity_defect,
)
from .shapes import generate, parse_shape_spec
from .shrinker import LambdaTable, lambda_reference, phi, shrinker_residual

__version__ = "0.1.0"
