"""Approximate minimal-cost paths for a point robot among polygonal
obstacles, where the cost of a path is its length weighted by the
reciprocal of the distance to the nearest obstacle.
"""

from .errors import (
    ClearpathError,
    DegenerateInputError,
    InternalError,
    PreconditionError,
    QuadratureError,
    SceneValidationError,
    UnreachableTargetError,
)
from .geometry import (
    AnalyticPrimitive,
    ClearanceResult,
    Feature,
    Path,
    Scene,
    arc_cost,
    clearance,
    hyperbolic_cost,
    log_ratio_cost,
    make_path,
    make_scene,
    path_cost_numeric,
    radial_cost,
    single_feature_geodesic,
    spiral_cost,
)
from .graphs import (
    ApproximationOutcome,
    Edgelet,
    Planner,
    SearchGraph,
    StageResult,
    approximate,
    build_G1,
    build_G2,
    build_G3,
    candidate_set,
    dijkstra,
    mark_edgelets,
    shadow_point,
    stage1,
    stage2,
    stage3,
)

__version__ = "0.1.0"
