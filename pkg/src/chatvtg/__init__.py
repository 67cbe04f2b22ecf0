"""Zero-shot video temporal grounding via segment captioning and matching."""

__version__ = "0.1.0"

from .core import (
    GroundTruthAnnotation,
    MomentPrediction,
    Query,
    Granularity,
    TimeInterval,
    VideoMeta,
    interval_intersection,
    temporal_iou,
)
from .matching import FusionMethod
from .providers import Providers
from .refinement import PipelineConfig, ground, ground_coarse, refine_moment
from .segmentation import WindowSpec, generate_windows, split_equal

__all__ = [
    "FusionMethod",
    "Granularity",
    "GroundTruthAnnotation",
    "MomentPrediction",
    "PipelineConfig",
    "Providers",
    "Query",
    "TimeInterval",
    "VideoMeta",
    "WindowSpec",
    "generate_windows",
    "ground",
    "ground_coarse",
    "interval_intersection",
    "refine_moment",
    "split_equal",
    "temporal_iou",
    "__version__",
]
