"""Uncertainty-aware bounding-box tools.

Box regression with a Gaussian head (location plus log-variance trained
under a divergence-derived loss), detection suppression that fuses
overlapping boxes by predicted variance, and a small COCO-style metric
evaluator. See the README for the file formats and the CLI.
"""

from .geometry import (
    Anchor,
    Box,
    BoxOffsets,
    clamp_box,
    decode_offsets,
    encode_offsets,
    iou,
    iou_matrix,
)
from .losses import (
    BatchLossOutput,
    GaussianPrediction,
    GradCheckResult,
    LossOutput,
    gradient_check,
    gradients_wrt_sigma,
    kl_loss,
    kl_loss_arrays,
    kl_loss_batch,
    log_var_from_sigma,
    optimal_log_variance,
    sigma_from_log_var,
    variance_from_log_var,
)
from .suppression import (
    Detection,
    SuppressConfig,
    VarianceVotingSuppressor,
    hard_nms,
    soft_nms_decay,
    suppress,
    variance_vote,
)
from .evaluation import (
    EvalConfig,
    EvalResult,
    GroundTruthBox,
    IdMismatchError,
    average_precision,
    evaluate,
    match_detections,
)
from .records import (
    DetectionRecord,
    GroundTruthRecord,
    RecordParseError,
    read_detections,
    read_ground_truths,
    write_detections,
)
from .synthetic import (
    DivergenceError,
    GaussianCoordinateEstimator,
    SyntheticGroup,
    TrainState,
    fit_coordinate,
    generate_labels,
    run_experiment,
)

__version__ = "0.1.0"
