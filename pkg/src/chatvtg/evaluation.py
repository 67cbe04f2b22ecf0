"""Annotation loading, recall-at-IoU / mean-IoU metrics, and report assembly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .core import GroundTruthAnnotation, Query, TimeInterval, temporal_iou
from .errors import EvaluationError, FormatError, InvalidArgumentError

RECALL_THRESHOLDS = (0.3, 0.5, 0.7)
MAX_REJECT_FRACTION = 0.10


@dataclass(frozen=True)
class RejectedLine:
    line_number: int
    line: str
    reason: str


@dataclass
class AnnotationLoad:
    annotations: list[GroundTruthAnnotation]
    rejects: list[RejectedLine]


@dataclass
class EvalReport:
    count: int
    recall_at: dict[float, float]
    mean_iou: float
    per_query: list[tuple[str, str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.count,
            "recall": {f"{t:g}": self.recall_at[t] for t in sorted(self.recall_at)},
            "miou": self.mean_iou,
        }

    def table(self) -> str:
        header = f"{'n':>6} " + " ".join(f"R@{t:g}".rjust(8) for t in sorted(self.recall_at))
        header += f" {'mIoU':>8}"
        row = f"{self.count:>6} " + " ".join(
            f"{self.recall_at[t]:8.4f}" for t in sorted(self.recall_at)
        )
        row += f" {self.mean_iou:8.4f}"
        return header + "\n" + row


def _parse_charades_line(line: str) -> GroundTruthAnnotation:
    head, sep, sentence = line.partition("##")
    if not sep:
        raise FormatError("missing '##' separator")
    parts = head.split()
    if len(parts) != 3:
        raise FormatError(f"expected 'video_id start end', got {head!r}")
    video_id, start_s, end_s = parts
    try:
        start, end = float(start_s), float(end_s)
    except ValueError as exc:
        raise FormatError(f"non-numeric timestamp: {exc}") from None
    if not sentence.strip():
        raise FormatError("empty query sentence")
    return GroundTruthAnnotation(video_id, TimeInterval(start, end), Query(sentence))


def _parse_jsonl_line(line: str) -> GroundTruthAnnotation:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    try:
        return GroundTruthAnnotation(
            str(record["video_id"]),
            TimeInterval(float(record["start"]), float(record["end"])),
            Query(str(record["query"])),
        )
    except KeyError as exc:
        raise FormatError(f"missing field {exc}") from None


def load_annotations(
    path: str | Path,
    format: str = "jsonl",
    durations: dict[str, float] | None = None,
) -> AnnotationLoad:
    """Parse an annotation file; malformed lines go to the rejects report.

    With a durations map, annotations spilling past the declared video
    duration are flagged (kept, not rejected). More than 10% malformed lines
    is treated as the wrong format.
    """
    if format not in ("charades_sta", "jsonl"):
        raise InvalidArgumentError(f"unknown annotation format {format!r}")
    parse = _parse_charades_line if format == "charades_sta" else _parse_jsonl_line
    annotations: list[GroundTruthAnnotation] = []
    rejects: list[RejectedLine] = []
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            total += 1
            try:
                ann = parse(line)
            except (FormatError, InvalidArgumentError) as exc:
                rejects.append(RejectedLine(number, line, str(exc)))
                continue
            if durations is not None:
                duration = durations.get(ann.video_id)
                if duration is not None and ann.interval.end > duration:
                    ann = GroundTruthAnnotation(
                        ann.video_id, ann.interval, ann.query, flagged=True
                    )
            annotations.append(ann)
    if total and len(rejects) / total > MAX_REJECT_FRACTION:
        raise FormatError(
            f"{len(rejects)}/{total} lines malformed in {path}; wrong --format?"
        )
    return AnnotationLoad(annotations, rejects)


def recall_at_iou(
    pairs: Sequence[tuple[TimeInterval, TimeInterval]], threshold: float
) -> float:
    """Fraction of (prediction, ground truth) pairs with tIoU >= threshold."""
    if not pairs:
        raise InvalidArgumentError("cannot compute recall over zero pairs")
    hits = sum(1 for pred, gt in pairs if temporal_iou(pred, gt) >= threshold)
    return hits / len(pairs)


def mean_iou(pairs: Sequence[tuple[TimeInterval, TimeInterval]]) -> float:
    if not pairs:
        raise InvalidArgumentError("cannot compute mean IoU over zero pairs")
    # fsum keeps the mean independent of pair ordering
    return math.fsum(temporal_iou(pred, gt) for pred, gt in pairs) / len(pairs)


def load_predictions(path: str | Path) -> list[dict]:
    predictions = []
    with open(path, "r", encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{number}: invalid JSON: {exc}") from None
            predictions.append(record)
    return predictions


def _join_key(video_id: str, query_text: str) -> tuple[str, str]:
    return (video_id, " ".join(query_text.split()))


def join_predictions(
    predictions: Iterable[dict],
    annotations: Sequence[GroundTruthAnnotation],
    allow_partial: bool = False,
) -> list[tuple[GroundTruthAnnotation, TimeInterval]]:
    """Match predictions to annotations on (video_id, normalized query).

    Duplicate keys are matched positionally after a stable sort. In strict
    mode any unmatched entry on either side fails the evaluation.
    """
    ann_buckets: dict[tuple[str, str], list[GroundTruthAnnotation]] = {}
    for ann in annotations:
        ann_buckets.setdefault(_join_key(ann.video_id, ann.query.text), []).append(ann)

    matched: list[tuple[GroundTruthAnnotation, TimeInterval]] = []
    unmatched_predictions: list[tuple[str, str]] = []
    for record in predictions:
        key = _join_key(str(record["video_id"]), str(record["query"]))
        bucket = ann_buckets.get(key)
        if bucket:
            ann = bucket.pop(0)
            matched.append((ann, TimeInterval(float(record["ts"]), float(record["te"]))))
        else:
            unmatched_predictions.append(key)

    unmatched_annotations = [key for key, bucket in ann_buckets.items() if bucket]
    if (unmatched_predictions or unmatched_annotations) and not allow_partial:
        raise EvaluationError(
            f"join failed: {len(unmatched_predictions)} unmatched predictions "
            f"{unmatched_predictions[:5]}, {len(unmatched_annotations)} unmatched "
            f"annotations {unmatched_annotations[:5]}"
        )
    return matched


def evaluate(
    predictions_path: str | Path,
    annotations_path: str | Path,
    format: str = "jsonl",
    allow_partial: bool = False,
    thresholds: Sequence[float] = RECALL_THRESHOLDS,
) -> EvalReport:
    """Score a prediction file against an annotation file."""
    predictions = load_predictions(predictions_path)
    if not predictions:
        raise EvaluationError(f"prediction file {predictions_path} is empty")
    load = load_annotations(annotations_path, format)
    matched = join_predictions(predictions, load.annotations, allow_partial)
    if not matched:
        raise EvaluationError("no prediction matched any annotation")
    pairs = [(pred, ann.interval) for ann, pred in matched]
    per_query = [
        (ann.video_id, ann.query.text, temporal_iou(pred, ann.interval))
        for ann, pred in matched
    ]
    return EvalReport(
        count=len(pairs),
        recall_at={t: recall_at_iou(pairs, t) for t in thresholds},
        mean_iou=mean_iou(pairs),
        per_query=per_query,
    )
