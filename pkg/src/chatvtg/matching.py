"""Similarity matrix construction, score fusion, and moment selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

from .core import CaptionSet, EmbeddingVector, Granularity, Query, ScoreMatrix, TimeInterval
from .errors import InvalidArgumentError
from .providers import Embedder


class FusionMethod(IntEnum):
    """Strategies for collapsing the granularity x clip matrix to clip scores."""

    BASELINE_ACTION_ONLY = 1
    NORMALIZE_AFTER_SUM = 2
    SUM_AFTER_NORMALIZE = 3
    NORMALIZE_AFTER_ROW_MAX = 4
    NORMALIZE_AFTER_COLUMN_MAX = 5


DEFAULT_FUSION = FusionMethod.NORMALIZE_AFTER_COLUMN_MAX


@dataclass(frozen=True)
class ClipScores:
    clips: tuple[TimeInterval, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.clips) != len(self.scores):
            raise InvalidArgumentError("clips and scores must have equal length")


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a,b) / (|a||b|); zero-norm vectors score 0.0 (no evidence)."""
    if a.dimension != b.dimension:
        raise InvalidArgumentError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def build_score_matrix(
    caption_sets: Sequence[CaptionSet],
    query: Query,
    embedder: Embedder,
    granularities: Sequence[Granularity] | None = None,
) -> ScoreMatrix:
    """Cosine similarity of every caption against the query.

    Rows follow the fixed granularity order, columns follow clip order.
    """
    if granularities is None:
        granularities = tuple(Granularity)
    if caption_sets:
        for cs in caption_sets:
            missing = [g for g in granularities if g not in cs.captions]
            if missing:
                raise InvalidArgumentError(
                    f"caption set for {cs.segment} missing granularities "
                    f"{[g.keyword for g in missing]}"
                )
    query_vec = embedder.embed(query.text)
    values = []
    for granularity in granularities:
        row = []
        for cs in caption_sets:
            caption = cs.caption_for(granularity)
            if not caption.strip():
                row.append(0.0)
            else:
                row.append(cosine_similarity(embedder.embed(caption), query_vec))
        values.append(tuple(row))
    return ScoreMatrix(
        rows=tuple(granularities),
        cols=tuple(cs.segment for cs in caption_sets),
        values=tuple(values),
    )


def _normalize(vector: list[float]) -> list[float]:
    """Clamp negatives to zero, then scale so the max is 1.0.

    An all-zero (or all-nonpositive) vector is left at zero instead of
    divided; negative cosines are treated as no evidence.
    """
    clamped = [max(0.0, v) for v in vector]
    peak = max(clamped, default=0.0)
    if peak <= 0.0:
        return clamped
    return [v / peak for v in clamped]


def fuse(matrix: ScoreMatrix, method: FusionMethod) -> ClipScores:
    """Collapse the matrix to one normalized score per clip."""
    if matrix.m == 0:
        raise InvalidArgumentError("cannot fuse an empty matrix (no clips)")
    method = FusionMethod(method)
    if method is FusionMethod.BASELINE_ACTION_ONLY:
        if Granularity.ACTION not in matrix.rows:
            raise InvalidArgumentError("baseline fusion requires an action row")
        fused = list(matrix.values[matrix.rows.index(Granularity.ACTION)])
    elif method is FusionMethod.NORMALIZE_AFTER_SUM:
        fused = [sum(row[j] for row in matrix.values) for j in range(matrix.m)]
    elif method is FusionMethod.SUM_AFTER_NORMALIZE:
        fused = [0.0] * matrix.m
        for row in matrix.values:
            normalized_row = _normalize(list(row))
            for j, v in enumerate(normalized_row):
                fused[j] += v
    elif method is FusionMethod.NORMALIZE_AFTER_ROW_MAX:
        # Row holding the global maximum entry; ties go to the lowest index.
        best_row, best_value = 0, -math.inf
        for i, row in enumerate(matrix.values):
            row_max = max(row)
            if row_max > best_value:
                best_row, best_value = i, row_max
        fused = list(matrix.values[best_row])
    else:  # NORMALIZE_AFTER_COLUMN_MAX
        fused = [max(row[j] for row in matrix.values) for j in range(matrix.m)]
    return ClipScores(clips=matrix.cols, scores=tuple(_normalize(fused)))


def select_moment(scores: ClipScores, threshold: float) -> TimeInterval:
    """Span of the longest run of consecutive clips scoring >= threshold.

    Ties on run length prefer the higher mean score, then the earlier start.
    If no clip reaches the threshold, falls back to the single highest-scoring
    clip (earliest on ties).
    """
    if not 0 < threshold <= 1:
        raise InvalidArgumentError(f"threshold must be in (0, 1], got {threshold}")
    if not scores.clips:
        raise InvalidArgumentError("cannot select a moment from zero clips")

    best: tuple[int, float, float] | None = None  # (length, mean, -start_index)
    best_run: tuple[int, int] | None = None
    start = None
    for i, s in enumerate(list(scores.scores) + [-math.inf]):
        if s >= threshold:
            if start is None:
                start = i
        elif start is not None:
            run = (start, i - 1)
            length = i - start
            mean = sum(scores.scores[start:i]) / length
            key = (length, mean, -start)
            if best is None or key > best:
                best, best_run = key, run
            start = None

    if best_run is not None:
        lo, hi = best_run
        return TimeInterval(scores.clips[lo].start, scores.clips[hi].end)

    peak = max(range(len(scores.scores)), key=lambda i: (scores.scores[i], -i))
    return scores.clips[peak]
