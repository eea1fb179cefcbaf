"""Monocular 3D vehicle cuboid estimation from labeled 2D part annotations.

Roughly ten labeled clicks on vehicle parts (wheel contact points,
centerline marks, vertical edges, corners, left-right symmetric pairs,
direction arrows) compile into a perspective problem whose 3D points are
linear in the cuboid dimensions and a few auxiliary unknowns.  A
coordinate descent over a shared object-space cost alternates pose (PnP)
and parameter (least-squares) stages, probabilistic size priors resolve
scale and unobserved dimensions, and a pixel-domain Levenberg-Marquardt
pass refines the result.
"""

from .annotations import (
    Annotation,
    AnnotationLabel,
    CompileError,
    ConstraintSystem,
    DofReport,
    ParamLayout,
    compile_constraints,
    dof_report,
    evaluate_points,
)
from .camera import (
    CameraIntrinsics,
    CuboidPose,
    CUBOID_EDGES,
    camera_center_in_vehicle,
    cuboid_corners,
    normalize_pixel,
    project,
)
from .metrics import (
    MetricsReport,
    combined_error,
    evaluate_pair,
    iou3d,
    relative_errors,
    rotation_error_deg,
    scaled_iou,
)
from .priors import PriorTable, SizePrior, fit_prior, geometric_median
from .solver import (
    CheiralityError,
    DegenerateGeometryError,
    LineConstraint,
    SolveResult,
    SolverConfig,
    SolverError,
    UnderConstrainedError,
    coordinate_descent,
    extract_line_constraints,
    init_yaw,
    ls_stage,
    pixel_finetune,
    pnp_stage,
    solve,
)
from .synth import SceneSpec, SyntheticScene, fd_jacobian, generate_scene, mc_box_volume

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationLabel",
    "CameraIntrinsics",
    "CheiralityError",
    "CompileError",
    "ConstraintSystem",
    "CuboidPose",
    "CUBOID_EDGES",
    "DegenerateGeometryError",
    "DofReport",
    "LineConstraint",
    "MetricsReport",
    "ParamLayout",
    "PriorTable",
    "SceneSpec",
    "SizePrior",
    "SolveResult",
    "SolverConfig",
    "SolverError",
    "SyntheticScene",
    "UnderConstrainedError",
    "camera_center_in_vehicle",
    "combined_error",
    "compile_constraints",
    "coordinate_descent",
    "cuboid_corners",
    "dof_report",
    "evaluate_pair",
    "evaluate_points",
    "extract_line_constraints",
    "fd_jacobian",
    "fit_prior",
    "generate_scene",
    "geometric_median",
    "init_yaw",
    "iou3d",
    "ls_stage",
    "mc_box_volume",
    "normalize_pixel",
    "pixel_finetune",
    "pnp_stage",
    "project",
    "relative_errors",
    "rotation_error_deg",
    "scaled_iou",
    "solve",
]
