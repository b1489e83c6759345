"""Pseudo-label selection machinery for semi-supervised single-stage detection.

The pipeline: a teacher's dense detections go through uncertainty-aware
suppression (nms_unc), the score threshold is re-selected periodically at the
F1 peak over a confidence grid (DsatState / maybe_update), and the surviving
labels split into classification and regression target sets gated separately
by score and by localization uncertainty (build_target_sets). The teacher
itself trails the student by an exponential moving average (ema_update).
"""

from .coco_io import (
    Dataset,
    ParseError,
    bbox_to_xywh,
    load_annotations,
    load_curve,
    load_detections,
    load_pseudo_labels,
    load_target_sets,
    save_curve,
    save_detections,
    save_pseudo_labels,
    save_target_sets,
)
from .dsat import (
    DEFAULT_SIGMA_CLS,
    DEFAULT_UPDATE_PERIOD,
    DsatState,
    HistoryEntry,
    fixed_threshold_baseline,
    history_to_csv,
    maybe_update,
    select_threshold,
)
from .geometry import BBox, area, iou
from .metrics import (
    DEFAULT_MATCH_IOU,
    F1Curve,
    GridSpec,
    GroundTruth,
    MatchResult,
    PRPoint,
    curve_to_csv,
    f1,
    match_detections,
    pr_curve,
)
from .nms import (
    DEFAULT_IOU_THRESHOLD,
    DEFAULT_SCORE_THRESHOLD,
    INFERENCE_SCORE_THRESHOLD,
    ClusterStats,
    DegenerateClusterError,
    Detection,
    NmsDiagnostics,
    PseudoLabel,
    cluster_stats,
    cluster_uncertainty,
    nms_unc,
    nms_unc_with_diagnostics,
    pseudo_label_detections,
    standard_nms,
)
from .sim import (
    DegenerateStudyError,
    SimConfig,
    StudyReport,
    generate_scene,
    run_correlation_study,
    run_dsat_trajectory,
    run_sampling_ratio_study,
)
from .targets import (
    DEFAULT_EMA_RATE,
    DEFAULT_SIGMA_UNC,
    TargetSets,
    build_target_sets,
    ema_update,
    final_score,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ClusterStats",
    "DEFAULT_EMA_RATE",
    "DEFAULT_IOU_THRESHOLD",
    "DEFAULT_MATCH_IOU",
    "DEFAULT_SCORE_THRESHOLD",
    "DEFAULT_SIGMA_CLS",
    "DEFAULT_SIGMA_UNC",
    "DEFAULT_UPDATE_PERIOD",
    "Dataset",
    "DegenerateClusterError",
    "DegenerateStudyError",
    "Detection",
    "DsatState",
    "F1Curve",
    "GridSpec",
    "GroundTruth",
    "HistoryEntry",
    "INFERENCE_SCORE_THRESHOLD",
    "MatchResult",
    "NmsDiagnostics",
    "PRPoint",
    "ParseError",
    "PseudoLabel",
    "SimConfig",
    "StudyReport",
    "TargetSets",
    "area",
    "bbox_to_xywh",
    "build_target_sets",
    "cluster_stats",
    "cluster_uncertainty",
    "curve_to_csv",
    "ema_update",
    "f1",
    "final_score",
    "fixed_threshold_baseline",
    "generate_scene",
    "history_to_csv",
    "iou",
    "load_annotations",
    "load_curve",
    "load_detections",
    "load_pseudo_labels",
    "load_target_sets",
    "match_detections",
    "maybe_update",
    "nms_unc",
    "nms_unc_with_diagnostics",
    "pr_curve",
    "pseudo_label_detections",
    "run_correlation_study",
    "save_curve",
    "save_detections",
    "save_pseudo_labels",
    "save_target_sets",
    "run_dsat_trajectory",
    "run_sampling_ratio_study",
    "select_threshold",
    "standard_nms",
    "__version__",
]
