"""Full grounding pipeline: coarse pass, then sliding-window moment refinement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .core import (
    ALL_GRANULARITIES,
    Granularity,
    MomentPrediction,
    Query,
    TimeInterval,
    VideoMeta,
    temporal_iou,
)
from .errors import InvalidArgumentError
from .matching import ClipScores, DEFAULT_FUSION, FusionMethod, build_score_matrix, fuse, select_moment
from .providers import Providers, caption_segment_all
from .segmentation import WindowSpec, generate_windows, split_equal


@dataclass(frozen=True)
class PipelineConfig:
    clip_count: int = 5
    window: WindowSpec = field(default_factory=lambda: WindowSpec(wide=10.0, step=5.0))
    refine_gate_iou: float = 0.7
    threshold: float = 0.8
    fusion: FusionMethod = DEFAULT_FUSION
    refine: bool = True
    flush_tail: bool = False
    granularities: tuple[Granularity, ...] = ALL_GRANULARITIES

    def __post_init__(self) -> None:
        if self.clip_count < 1:
            raise InvalidArgumentError(f"clip_count must be >= 1, got {self.clip_count}")
        if not 0 < self.refine_gate_iou <= 1:
            raise InvalidArgumentError(
                f"refine_gate_iou must be in (0, 1], got {self.refine_gate_iou}"
            )
        if not 0 < self.threshold <= 1:
            raise InvalidArgumentError(f"threshold must be in (0, 1], got {self.threshold}")
        if not self.granularities:
            raise InvalidArgumentError("at least one granularity is required")

    def to_dict(self) -> dict:
        return {
            "clip_count": self.clip_count,
            "window_wide": self.window.wide,
            "window_step": self.window.step,
            "refine_gate_iou": self.refine_gate_iou,
            "threshold": self.threshold,
            "fusion": int(self.fusion),
            "refine": self.refine,
            "flush_tail": self.flush_tail,
            "granularities": [g.keyword for g in self.granularities],
        }


def _match_segments(
    video: VideoMeta,
    query: Query,
    segments: Sequence[TimeInterval],
    config: PipelineConfig,
    providers: Providers,
) -> ClipScores:
    caption_sets = [
        caption_segment_all(providers.captioner, video.video_id, seg, config.granularities)
        for seg in segments
    ]
    matrix = build_score_matrix(caption_sets, query, providers.embedder, config.granularities)
    return fuse(matrix, config.fusion)


def ground_coarse(
    video: VideoMeta,
    query: Query,
    config: PipelineConfig,
    providers: Providers,
) -> tuple[TimeInterval, ClipScores]:
    """Coarse pass: equal-length clips, caption, match, select."""
    clips = split_equal(video, config.clip_count)
    scores = _match_segments(video, query, clips, config, providers)
    return select_moment(scores, config.threshold), scores


def refine_moment(
    video: VideoMeta,
    query: Query,
    coarse: TimeInterval,
    config: PipelineConfig,
    providers: Providers,
) -> TimeInterval:
    """Re-score sliding windows that overlap the coarse moment strongly.

    Windows are generated over the whole video, gated on tIoU with the coarse
    moment exceeding ``refine_gate_iou``, re-captioned, re-matched, and the
    selection rule runs over the qualifying windows in start order. If no
    window passes the gate, the coarse moment is returned unchanged.
    """
    windows = generate_windows(video.duration, config.window, config.flush_tail)
    qualifying = [w for w in windows if temporal_iou(w, coarse) > config.refine_gate_iou]
    if not qualifying:
        return coarse
    qualifying.sort(key=lambda w: (w.start, w.end))
    scores = _match_segments(video, query, qualifying, config, providers)
    return select_moment(scores, config.threshold)


def ground(
    video: VideoMeta,
    query: Query,
    config: PipelineConfig,
    providers: Providers,
) -> MomentPrediction:
    """Run the full pipeline and package the result with provenance."""
    coarse, scores = ground_coarse(video, query, config, providers)
    refined = False
    moment = coarse
    if config.refine:
        moment = refine_moment(video, query, coarse, config, providers)
        refined = True
    return MomentPrediction(
        video_id=video.video_id,
        query=query,
        moment=moment,
        coarse_moment=coarse,
        fusion_method=int(config.fusion),
        per_clip_scores=scores.scores,
        refined=refined,
    )
