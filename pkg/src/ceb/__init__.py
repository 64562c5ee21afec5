"""Boundary-centric cell instance segmentation on semantic probability maps."""

from .classifier import (ConstantScorer, ExternalScorer, OracleScorer, ScorerConfig,
                         ScorerModel, binarize, focal_loss, train)
from .errors import CapacityError, CebError, FormatError, RangeError
from .metrics_synth import MetricsReport, SynthSpec, evaluate, evaluate_video, synth_image, synth_video
from .pipeline import (FrameArtifacts, PipelineConfig, analyze_frame, make_training_set,
                       oracle_scorer, segment_frame, segment_frame_wo_cls)
from .raster_io import (BinaryRaster, LabelMap, ProbMap, read_labelmap, read_probmap,
                        write_labelmap, write_probmap)
from .temporal import TemporalConfig, segment_video

__version__ = "0.1.0"

__all__ = [
    "BinaryRaster", "CapacityError", "CebError", "ConstantScorer", "ExternalScorer",
    "FormatError", "FrameArtifacts", "LabelMap", "MetricsReport", "OracleScorer",
    "PipelineConfig", "ProbMap", "RangeError", "ScorerConfig", "ScorerModel",
    "SynthSpec", "TemporalConfig", "analyze_frame", "binarize", "evaluate",
    "evaluate_video", "focal_loss", "make_training_set", "oracle_scorer",
    "read_labelmap", "read_probmap", "segment_frame", "segment_frame_wo_cls",
    "segment_video", "synth_image", "synth_video", "train", "write_labelmap",
    "write_probmap",
]
