"""Speaker-change detection on synthetic multi-layer feature stacks.

The pipeline: RTTM annotations -> fuzzy frame labels and segment maps ->
contrastive triplets -> a small attention/convolution sequence classifier
over softmax-fused feature layers -> thresholded peak-picking -> purity,
coverage, and F1 against the reference. A feature-space dialogue
simulator supplies corpora with exact ground truth.
"""

from .annotations import (
    Annotation,
    ChangePoints,
    TimeSpan,
    derive_change_points,
    dump_rttm,
    format_rttm,
    load_rttm,
    parse_rttm,
    partition_extent,
    reference_segmentation,
)
from .autodiff import Tensor, backward
from .config import ModelSection, RunConfig
from .detection import DetectionConfig, detect_change_points
from .errors import (
    ConfigError,
    FileFormatError,
    RttmParseError,
    ScdError,
    ShapeError,
    TrainingDivergedError,
    ValidationError,
)
from .labeling import FrameGrid, SegmentMap, fuzzy_labels, segment_map
from .losses import LossConfig, combined_loss, contrastive_loss, prediction_loss
from .metrics import MetricReport, aggregate, evaluate_annotation, score_segments
from .model import (
    FrameClassifier,
    LayerStack,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
)
from .sampling import RANDOM_VECTOR, SamplerConfig, Triplet, sample_triplets
from .simulator import (
    Dialogue,
    SimConfig,
    read_features,
    simulate,
    simulate_corpus,
    write_features,
)
from .training import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "ChangePoints",
    "ConfigError",
    "DetectionConfig",
    "Dialogue",
    "FileFormatError",
    "FrameClassifier",
    "FrameGrid",
    "LayerStack",
    "LossConfig",
    "MetricReport",
    "ModelConfig",
    "ModelSection",
    "RANDOM_VECTOR",
    "RttmParseError",
    "RunConfig",
    "SamplerConfig",
    "ScdError",
    "SegmentMap",
    "ShapeError",
    "SimConfig",
    "Tensor",
    "TimeSpan",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "Triplet",
    "ValidationError",
    "aggregate",
    "backward",
    "combined_loss",
    "contrastive_loss",
    "derive_change_points",
    "detect_change_points",
    "dump_rttm",
    "evaluate_annotation",
    "format_rttm",
    "fuzzy_labels",
    "load_checkpoint",
    "load_rttm",
    "parse_rttm",
    "partition_extent",
    "prediction_loss",
    "read_features",
    "reference_segmentation",
    "sample_triplets",
    "save_checkpoint",
    "score_segments",
    "segment_map",
    "simulate",
    "simulate_corpus",
    "train",
    "write_features",
]
