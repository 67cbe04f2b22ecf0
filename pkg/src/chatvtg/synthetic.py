"""Synthetic oracle-mode corpus: analytically predictable end-to-end inputs.

Each generated video carries one ground-truth moment and a query. The oracle
caption provider emits the query text for segments overlapping the moment and
filler elsewhere, so pipeline recall on the corpus is known by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .core import TimeInterval
from .matching import cosine_similarity
from .providers import (
    DEFAULT_FILLER,
    MockEmbedder,
    OracleCaptionProvider,
    Providers,
)

_VERBS = [
    "opens", "closes", "lifts", "drops", "throws", "catches", "washes",
    "folds", "reads", "writes", "paints", "sweeps", "stacks", "carries",
    "pours", "slices", "stirs", "kicks", "rolls", "spins",
]
_NOUNS = [
    "door", "window", "box", "ball", "towel", "book", "letter", "canvas",
    "broom", "plate", "bottle", "knife", "pan", "chair", "ladder", "rope",
    "basket", "drum", "wheel", "kettle",
]

# Coarse clip spans (start_clip, end_clip) over 5 clips whose coarse moment
# admits no refinement window above the 0.7 IoU gate at window (10, 5); the
# coarse pass already recovers these exactly.
_GRID_SPANS = [
    (0, 1), (1, 2), (2, 3), (3, 4), (4, 5),
    (1, 3), (2, 4), (0, 3), (1, 4), (2, 5),
]


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    duration: float
    ground_truth: TimeInterval
    query: str
    grid_aligned: bool


def _make_query(rng: random.Random, embedder: MockEmbedder, filler: str) -> str:
    filler_vec = embedder.embed(filler)
    while True:
        query = f"a person {rng.choice(_VERBS)} the {rng.choice(_NOUNS)}"
        # Guard against hash collisions sneaking filler similarity upward.
        if cosine_similarity(embedder.embed(query), filler_vec) < 0.3:
            return query


def generate_corpus(
    count: int = 20,
    seed: int = 7,
    duration: float = 30.0,
    filler: str = DEFAULT_FILLER,
) -> list[SyntheticVideo]:
    """Half the videos get clip-grid-aligned moments, half window-aligned ones.

    Grid-aligned moments are recovered exactly by the coarse pass alone;
    window-aligned moments ([0, 10) or [duration-10, duration)) need the
    refinement pass to reach tIoU 1.0.
    """
    rng = random.Random(seed)
    embedder = MockEmbedder()
    clip_len = duration / 5
    videos: list[SyntheticVideo] = []
    seen_queries: set[str] = set()
    for i in range(count):
        while True:
            query = _make_query(rng, embedder, filler)
            if query not in seen_queries:
                seen_queries.add(query)
                break
        grid_aligned = i < (count + 1) // 2
        if grid_aligned:
            lo, hi = _GRID_SPANS[i % len(_GRID_SPANS)]
            gt = TimeInterval(lo * clip_len, hi * clip_len)
        elif i % 2 == 0:
            gt = TimeInterval(0.0, 10.0)
        else:
            gt = TimeInterval(duration - 10.0, duration)
        videos.append(
            SyntheticVideo(f"synth{i:03d}", duration, gt, query, grid_aligned)
        )
    return videos


def write_corpus(videos: list[SyntheticVideo], out_dir: str | Path) -> tuple[Path, Path]:
    """Write annotations JSONL and a durations sidecar; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    annotations = out / "annotations.jsonl"
    durations = out / "durations.json"
    with annotations.open("w", encoding="utf-8") as fh:
        for v in videos:
            fh.write(
                json.dumps(
                    {
                        "video_id": v.video_id,
                        "start": v.ground_truth.start,
                        "end": v.ground_truth.end,
                        "query": v.query,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    with durations.open("w", encoding="utf-8") as fh:
        json.dump({v.video_id: v.duration for v in videos}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return annotations, durations


def oracle_providers(
    videos: list[SyntheticVideo],
    overlap_fraction: float = 0.5,
    filler: str = DEFAULT_FILLER,
) -> Providers:
    ground_truth = {v.video_id: (v.ground_truth, v.query) for v in videos}
    return Providers(
        captioner=OracleCaptionProvider(ground_truth, overlap_fraction, filler),
        embedder=MockEmbedder(),
    )
