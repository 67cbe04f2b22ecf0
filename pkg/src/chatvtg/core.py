"""Shared domain vocabulary: intervals, videos, queries, captions, score matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import InvalidArgumentError

# Interval equality / cache keys round to this many decimal places so that
# file caches stay stable across float formatting.
KEY_DECIMALS = 3


@dataclass(frozen=True)
class TimeInterval:
    """Half-open [start, end) span in seconds."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if self.start < 0:
            raise InvalidArgumentError(f"interval start must be >= 0, got {self.start}")
        if self.end <= self.start:
            raise InvalidArgumentError(
                f"interval end ({self.end}) must exceed start ({self.start})"
            )

    @property
    def length(self) -> float:
        return self.end - self.start

    def key(self) -> tuple[float, float]:
        """Rounded (start, end) pair used for caching and equality-by-key."""
        return (round(self.start, KEY_DECIMALS), round(self.end, KEY_DECIMALS))

    def __str__(self) -> str:
        return f"[{self.start:.2f}, {self.end:.2f})"


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    duration: float

    def __post_init__(self) -> None:
        if not self.video_id:
            raise InvalidArgumentError("video_id must be non-empty")
        if self.duration <= 0:
            raise InvalidArgumentError(f"duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class Query:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InvalidArgumentError("query text must contain a non-whitespace character")

    def normalized(self) -> str:
        """Whitespace-collapsed form used as a join key."""
        return " ".join(self.text.split())


class Granularity(Enum):
    """The five caption perspectives, each with its fixed instruction sentence."""

    ACTION = "Describe the action of the person in the video."
    PLACE = "Where does this video take place?"
    DRESSING = "What are the people in the video wearing?"
    EMOTION = "illustrate the person's emotion or facial expression."
    INTERACTION = "Describe the interaction of person and other people or things."

    @property
    def instruction(self) -> str:
        return self.value

    @property
    def keyword(self) -> str:
        return self.name.lower()

    @classmethod
    def from_keyword(cls, keyword: str) -> "Granularity":
        try:
            return cls[keyword.upper()]
        except KeyError:
            raise InvalidArgumentError(f"unknown granularity {keyword!r}") from None


ALL_GRANULARITIES: tuple[Granularity, ...] = tuple(Granularity)


@dataclass(frozen=True)
class CaptionSet:
    """Captions for one segment, one entry per requested granularity."""

    segment: TimeInterval
    captions: Mapping[Granularity, str]

    def caption_for(self, granularity: Granularity) -> str:
        return self.captions[granularity]

    def granularities(self) -> tuple[Granularity, ...]:
        return tuple(self.captions.keys())


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)

    def __post_init__(self) -> None:
        if not self.values:
            raise InvalidArgumentError("embedding vector must be non-empty")


@dataclass(frozen=True)
class ScoreMatrix:
    """Granularity x clip grid of cosine similarities."""

    rows: tuple[Granularity, ...]
    cols: tuple[TimeInterval, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.rows):
            raise InvalidArgumentError("row count does not match granularity list")
        for row in self.values:
            if len(row) != len(self.cols):
                raise InvalidArgumentError("column count does not match clip list")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def m(self) -> int:
        return len(self.cols)


@dataclass(frozen=True)
class MomentPrediction:
    video_id: str
    query: Query
    moment: TimeInterval
    coarse_moment: TimeInterval
    fusion_method: int
    per_clip_scores: tuple[float, ...]
    refined: bool

    def to_record(self) -> dict:
        return {
            "video_id": self.video_id,
            "query": self.query.text,
            "ts": self.moment.start,
            "te": self.moment.end,
            "coarse_ts": self.coarse_moment.start,
            "coarse_te": self.coarse_moment.end,
            "fusion": self.fusion_method,
            "refined": self.refined,
        }


@dataclass(frozen=True)
class GroundTruthAnnotation:
    video_id: str
    interval: TimeInterval
    query: Query
    # Annotations whose interval spills past the declared video duration are
    # kept (datasets are noisy) but flagged by the loader.
    flagged: bool = field(default=False, compare=False)


def interval_intersection(a: TimeInterval, b: TimeInterval) -> float:
    """Overlap in seconds between two intervals; never negative."""
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


def temporal_iou(a: TimeInterval, b: TimeInterval) -> float:
    """Temporal intersection-over-union; symmetric, in [0, 1]."""
    inter = interval_intersection(a, b)
    union = a.length + b.length - inter
    return inter / union


def span(intervals: Sequence[TimeInterval]) -> TimeInterval:
    """Covering interval (min start, max end) of a non-empty sequence."""
    if not intervals:
        raise InvalidArgumentError("cannot take the span of an empty interval list")
    return TimeInterval(min(i.start for i in intervals), max(i.end for i in intervals))
