"""Multiview RGB-D registration toolkit.

Correspondence estimation with ratio-test weighting, robust weighted
Procrustes alignment, confidence-weighted SE(3) synchronization by power
iteration, geometry-aware refinement, and a synthetic-scene harness with
known ground truth.
"""

__version__ = "0.1.0"

from .alignment import AlignmentResult, RansacConfig, weighted_procrustes, wp_ransac
from .correspondence import (
    Correspondence,
    CorrespondenceSet,
    FeaturePointcloud,
    cosine_distance,
    gart_distance,
    match_gart,
    match_ratio_test,
    ratio_weight,
)
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    RigidTransform,
    ScaledTransform,
    backproject,
    compose,
    invert,
    project_points,
    project_to_se3,
    project_to_so3,
)
from .metrics import (
    BenchmarkRow,
    CorrespondenceErrorReport,
    PoseErrorReport,
    correspondence_errors,
    pose_auc,
    pose_error_report,
    pose_errors,
    sync_benchmark,
)
from .pipeline import (
    PairDiagnostics,
    PipelineConfig,
    SceneInput,
    SceneRegistration,
    register,
    register_scene,
    register_sequence_windowed,
    registration_loss,
)
from .synchronization import (
    BlockMatrix,
    PoseGraph,
    SyncResult,
    build_block_matrix,
    pairwise_confidence,
    rescale_confidence,
    synchronize_eig,
    synchronize_naive,
    synchronize_power,
)
from .synthetic import (
    CorruptionSpec,
    SyntheticScene,
    generate_scene,
    ground_truth_graph,
    observe_frame,
    perturb_pose_graph,
    random_pose_problem,
    render_depth,
)

__all__ = [
    "AlignmentResult",
    "BenchmarkRow",
    "BlockMatrix",
    "CameraIntrinsics",
    "Correspondence",
    "CorrespondenceErrorReport",
    "CorrespondenceSet",
    "CorruptionSpec",
    "DepthMap",
    "FeaturePointcloud",
    "PairDiagnostics",
    "PipelineConfig",
    "PoseErrorReport",
    "PoseGraph",
    "RansacConfig",
    "RigidTransform",
    "ScaledTransform",
    "SceneInput",
    "SceneRegistration",
    "SyncResult",
    "SyntheticScene",
    "backproject",
    "build_block_matrix",
    "compose",
    "correspondence_errors",
    "cosine_distance",
    "gart_distance",
    "generate_scene",
    "ground_truth_graph",
    "invert",
    "match_gart",
    "match_ratio_test",
    "observe_frame",
    "pairwise_confidence",
    "perturb_pose_graph",
    "pose_auc",
    "pose_error_report",
    "pose_errors",
    "project_points",
    "project_to_se3",
    "project_to_so3",
    "random_pose_problem",
    "ratio_weight",
    "register",
    "register_scene",
    "register_sequence_windowed",
    "registration_loss",
    "render_depth",
    "rescale_confidence",
    "sync_benchmark",
    "synchronize_eig",
    "synchronize_naive",
    "synchronize_power",
    "weighted_procrustes",
    "wp_ransac",
]
