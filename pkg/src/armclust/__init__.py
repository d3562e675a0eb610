"""Clustering and variability analysis of multivariate joint-angle trajectories."""

from .averaging import (
    DbaRun,
    batch_dtw_align,
    cluster_average,
    cross_subject_average,
    dba_average,
    dba_run,
    default_warp_limit,
    normalize_directions,
)
from .divergence import (
    BezierFeature,
    DivergenceMatrix,
    Measure,
    WarpPath,
    bezier_curve,
    bezier_divergence,
    bidirectional_divergence,
    divergence_matrix,
    dtw,
    fit_cubic_bezier,
    normalized_dtw,
)
from .fpca import (
    FpcaResult,
    SplineFit,
    cluster_fpca,
    components_to_cover,
    fit_bspline,
    reconstruct_component,
)
from .hcluster import (
    Dendrogram,
    KneeResult,
    cut,
    find_knee,
    k_medoids,
    l_method,
    quality_score,
    repetition_pairs,
    ward_cluster,
)
from .kinematics import (
    ArmGeometry,
    ArmPose,
    end_effector_trace,
    forward_kinematics,
    trace_motion,
)
from .model import (
    ELBOW_WRIST4,
    FULL7,
    SHOULDER_ELBOW4,
    WRIST_ONLY3,
    Dataset,
    Direction,
    Handedness,
    JointModel,
    Segment,
    SegmentMeta,
    Trajectory,
    Violation,
    mirror_left_handed,
    model_by_name,
    project_dataset,
    validate_dataset,
)
from .pipeline import PipelineConfig, PipelineError, compare_methods, run_pipeline, synth_dataset
from .synth import SynthSpec, generate, minimum_jerk_profile

__version__ = "0.1.0"

__all__ = [
    "ArmGeometry",
    "ArmPose",
    "BezierFeature",
    "Dataset",
    "DbaRun",
    "Dendrogram",
    "Direction",
    "DivergenceMatrix",
    "ELBOW_WRIST4",
    "FULL7",
    "FpcaResult",
    "Handedness",
    "JointModel",
    "KneeResult",
    "Measure",
    "PipelineConfig",
    "PipelineError",
    "SHOULDER_ELBOW4",
    "Segment",
    "SegmentMeta",
    "SplineFit",
    "SynthSpec",
    "Trajectory",
    "Violation",
    "WRIST_ONLY3",
    "WarpPath",
    "batch_dtw_align",
    "bezier_curve",
    "bezier_divergence",
    "bidirectional_divergence",
    "cluster_average",
    "cluster_fpca",
    "compare_methods",
    "components_to_cover",
    "cross_subject_average",
    "cut",
    "dba_average",
    "dba_run",
    "default_warp_limit",
    "divergence_matrix",
    "dtw",
    "end_effector_trace",
    "find_knee",
    "fit_bspline",
    "fit_cubic_bezier",
    "forward_kinematics",
    "generate",
    "k_medoids",
    "l_method",
    "minimum_jerk_profile",
    "mirror_left_handed",
    "model_by_name",
    "normalize_directions",
    "normalized_dtw",
    "project_dataset",
    "quality_score",
    "reconstruct_component",
    "repetition_pairs",
    "run_pipeline",
    "synth_dataset",
    "trace_motion",
    "validate_dataset",
    "ward_cluster",
]
