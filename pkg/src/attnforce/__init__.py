"""Force-directed guidance of cross-attention maps away from a reserved text region."""
from .constraint import EditPlan, apply_plan, guidance_loss, spatial_excluding_constraint
from .core import (
    AttentionMap,
    AttentionStack,
    BoundingBox,
    GuidanceParams,
    Region,
    Vec2,
    bounding_box,
    centroid,
    mean_in_region,
    rasterize_region,
    region_centroid,
)
from .detect import ConflictSet, detect, detect_all
from .errors import (
    AttnForceError,
    DegenerateBox,
    DivisionDomain,
    EmptyMask,
    InvariantError,
    LayoutMismatch,
    ParseError,
    ShapeMismatch,
    SingularTransform,
    WarpFailure,
    ZeroMass,
)
from .forces import Force, TargetSpec, balance, displacement, margin_force, multi_target_force, repulsive_force
from .metrics import MetricsReport, composite_field, saliency_iou, tv_loss, vtcm
from .simulate import BlobObject, GuidanceReport, Scene, run, standard_scene
from .warp import AffineTransform, apply_affine, build_transform, compute_scale, translate_map, warp_step

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "AttentionMap",
    "AttentionStack",
    "AttnForceError",
    "BlobObject",
    "BoundingBox",
    "ConflictSet",
    "DegenerateBox",
    "DivisionDomain",
    "EditPlan",
    "EmptyMask",
    "Force",
    "GuidanceParams",
    "GuidanceReport",
    "InvariantError",
    "LayoutMismatch",
    "MetricsReport",
    "ParseError",
    "Region",
    "Scene",
    "ShapeMismatch",
    "SingularTransform",
    "TargetSpec",
    "Vec2",
    "WarpFailure",
    "ZeroMass",
    "apply_affine",
    "apply_plan",
    "balance",
    "bounding_box",
    "build_transform",
    "centroid",
    "composite_field",
    "compute_scale",
    "detect",
    "detect_all",
    "displacement",
    "guidance_loss",
    "margin_force",
    "mean_in_region",
    "multi_target_force",
    "rasterize_region",
    "region_centroid",
    "repulsive_force",
    "run",
    "saliency_iou",
    "spatial_excluding_constraint",
    "standard_scene",
    "translate_map",
    "tv_loss",
    "vtcm",
    "warp_step",
]
