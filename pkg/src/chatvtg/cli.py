"""Command-line front end: ground, batch, evaluate, ablate.

Configuration precedence is CLI flag > CHATVTG_* environment variable >
--config JSON file > built-in default; every batch run directory gets a
manifest recording the merged result.

Exit codes: 0 success, 2 invalid arguments or inputs, 3 provider failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .core import Granularity, MomentPrediction, Query, VideoMeta
from .errors import (
    CacheMissError,
    ChatVTGError,
    ConsistencyError,
    EvaluationError,
    FormatError,
    InvalidArgumentError,
    ProviderUnavailableError,
)
from .evaluation import EvalReport, evaluate, load_annotations
from .matching import FusionMethod
from .providers import (
    CachingCaptionProvider,
    CachingEmbedder,
    FileCaptionProvider,
    FileEmbedder,
    HttpCaptionProvider,
    HttpEmbedder,
    MockCaptionProvider,
    MockEmbedder,
    OracleCaptionProvider,
    Providers,
)
from .refinement import PipelineConfig, ground
from .segmentation import WindowSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROVIDER = 3
EXIT_INTERNAL = 4

_ENV_PREFIX = "CHATVTG_"


class CliError(Exception):
    """User-facing CLI failure carrying an exit code."""

    def __init__(self, message: str, code: int = EXIT_USAGE) -> None:
        super().__init__(message)
        self.code = code


def _resolve(args: argparse.Namespace, config_file: dict, name: str, default, cast):
    """flag > env > config file > default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get(_ENV_PREFIX + name.upper())
    if env is not None:
        return cast(env)
    if name in config_file:
        return cast(config_file[name])
    return default


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _load_config_file(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None) or os.environ.get(_ENV_PREFIX + "CONFIG")
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}")
    if not isinstance(loaded, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    return loaded


def build_pipeline_config(args: argparse.Namespace, config_file: dict) -> PipelineConfig:
    granularity = _resolve(args, config_file, "granularity", None, str)
    granularities = (
        (Granularity.from_keyword(granularity),) if granularity else tuple(Granularity)
    )
    try:
        return PipelineConfig(
            clip_count=_resolve(args, config_file, "clips", 5, int),
            window=WindowSpec(
                wide=_resolve(args, config_file, "window_wide", 10.0, float),
                step=_resolve(args, config_file, "window_step", 5.0, float),
            ),
            refine_gate_iou=_resolve(args, config_file, "refine_gate_iou", 0.7, float),
            threshold=_resolve(args, config_file, "threshold", 0.8, float),
            fusion=FusionMethod(_resolve(args, config_file, "fusion", 5, int)),
            refine=not _resolve(args, config_file, "no_refine", False, _parse_bool),
            flush_tail=_resolve(args, config_file, "flush_tail", False, _parse_bool),
            granularities=granularities,
        )
    except (InvalidArgumentError, ValueError) as exc:
        raise CliError(f"invalid pipeline configuration: {exc}")


def _load_durations(path: str | None) -> dict[str, float]:
    if not path:
        raise CliError("a --durations file (video_id -> seconds) is required")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read durations file {path}: {exc}")
    return {str(k): float(v) for k, v in raw.items()}


def _load_fixture_captions(path: str) -> dict:
    fixtures = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                key = (
                    str(record["video_id"]),
                    round(float(record["start"]), 3),
                    round(float(record["end"]), 3),
                    str(record["granularity"]),
                )
                fixtures[key] = str(record["caption"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"cannot read caption fixtures {path}: {exc}")
    return fixtures


def build_providers(args: argparse.Namespace, config_file: dict) -> tuple[Providers, dict]:
    kind = _resolve(args, config_file, "provider", "mock", str)
    cache = _resolve(args, config_file, "cache", None, str)
    endpoint = _resolve(args, config_file, "endpoint", None, str)
    timeout = _resolve(args, config_file, "timeout", 30.0, float)
    retries = _resolve(args, config_file, "max_retries", 3, int)
    oracle = _resolve(args, config_file, "oracle", None, str)
    fixtures = _resolve(args, config_file, "mock_fixtures", None, str)
    fmt = _resolve(args, config_file, "format", "jsonl", str)

    if kind == "mock":
        if oracle:
            load = load_annotations(oracle, fmt)
            ground_truth = {
                a.video_id: (a.interval, a.query.text) for a in load.annotations
            }
            captioner = OracleCaptionProvider(ground_truth)
        elif fixtures:
            captioner = MockCaptionProvider(_load_fixture_captions(fixtures))
        else:
            raise CliError("mock provider needs --oracle ANNOTATIONS or --mock-fixtures PATH")
        embedder = MockEmbedder()
    elif kind == "file":
        if not cache:
            raise CliError("file provider requires --cache DIR")
        captioner = FileCaptionProvider(Path(cache) / "captions.jsonl")
        embedder = FileEmbedder(Path(cache) / "embeddings.jsonl")
    elif kind == "http":
        if not endpoint:
            raise CliError("http provider requires --endpoint URL")
        captioner = HttpCaptionProvider(endpoint, timeout=timeout, max_retries=retries)
        embedder = HttpEmbedder(endpoint, timeout=timeout, max_retries=retries)
    else:
        raise CliError(f"unknown provider kind {kind!r}")

    if cache and kind != "file":
        captioner = CachingCaptionProvider(captioner, Path(cache) / "captions.jsonl")
        embedder = CachingEmbedder(embedder, Path(cache) / "embeddings.jsonl")

    snapshot = {
        "kind": kind,
        "endpoint": endpoint,
        "cache": cache,
        "oracle": oracle,
        "mock_fixtures": fixtures,
        "timeout": timeout,
        "max_retries": retries,
    }
    return Providers(captioner, embedder), snapshot


def run_batch(
    annotations,
    durations: dict[str, float],
    config: PipelineConfig,
    providers: Providers,
    workers: int = 1,
) -> list[MomentPrediction]:
    """Ground every annotation; output order follows input order regardless
    of worker count."""

    def one(annotation) -> MomentPrediction:
        duration = durations.get(annotation.video_id)
        if duration is None:
            raise CliError(f"no duration known for video {annotation.video_id!r}")
        video = VideoMeta(annotation.video_id, duration)
        return ground(video, annotation.query, config, providers)

    if workers <= 1:
        return [one(a) for a in annotations]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, annotations))


def _write_predictions(path: Path, predictions: list[MomentPrediction]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p.to_record()) + "\n")


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_ground(args: argparse.Namespace) -> int:
    config_file = _load_config_file(args)
    config = build_pipeline_config(args, config_file)
    providers, _ = build_providers(args, config_file)
    video = VideoMeta(args.video_id, args.duration)
    prediction = ground(video, Query(args.query), config, providers)
    print(json.dumps(prediction.to_record()))
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    config_file = _load_config_file(args)
    config = build_pipeline_config(args, config_file)
    providers, provider_snapshot = build_providers(args, config_file)
    fmt = _resolve(args, config_file, "format", "jsonl", str)
    durations = _load_durations(
        _resolve(args, config_file, "durations", None, str)
    )
    load = load_annotations(args.annotations, fmt, durations)
    if not load.annotations:
        raise CliError(f"annotation file {args.annotations} holds no usable annotations")
    workers = _resolve(args, config_file, "workers", 1, int)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "tool": "chatvtg",
        "version": __version__,
        "command": "batch",
        "config": config.to_dict(),
        "provider": provider_snapshot,
        "inputs": {
            "annotations": str(args.annotations),
            "format": fmt,
            "durations": _resolve(args, config_file, "durations", None, str),
            "annotation_count": len(load.annotations),
            "rejected_lines": len(load.rejects),
        },
        "outputs": {"predictions": "predictions.jsonl"},
        "workers": workers,
        "complete": False,
        "timings": {},
    }

    started = time.monotonic()
    try:
        predictions = run_batch(load.annotations, durations, config, providers, workers)
    except (ProviderUnavailableError, CacheMissError) as exc:
        manifest["timings"]["batch_seconds"] = time.monotonic() - started
        manifest["error"] = str(exc)
        _write_manifest(out_dir, manifest)
        raise CliError(f"provider failure: {exc}", EXIT_PROVIDER)
    manifest["timings"]["batch_seconds"] = time.monotonic() - started
    manifest["complete"] = True
    _write_predictions(out_dir / "predictions.jsonl", predictions)
    _write_manifest(out_dir, manifest)
    print(f"wrote {len(predictions)} predictions to {out_dir / 'predictions.jsonl'}",
          file=sys.stderr)
    return EXIT_OK


def _report_row(label: str, report: EvalReport) -> dict:
    return {"label": label, **report.to_dict()}


def cmd_evaluate(args: argparse.Namespace) -> int:
    config_file = _load_config_file(args)
    fmt = _resolve(args, config_file, "format", "jsonl", str)
    report = evaluate(
        args.predictions,
        args.annotations,
        fmt,
        allow_partial=bool(args.allow_partial),
    )
    print(report.table(), file=sys.stderr)
    print(json.dumps(report.to_dict(), sort_keys=True))
    if args.per_query_csv:
        with open(args.per_query_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["video_id", "query", "tiou"])
            writer.writerows(report.per_query)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "report.json").open("w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


ABLATION_CLIP_COUNTS = (3, 5, 10, 20)
ABLATION_WINDOWS = ((20.0, 5.0), (10.0, 5.0), (10.0, 2.0))


def run_ablation_grid(
    annotations,
    durations: dict[str, float],
    base: PipelineConfig,
    providers: Providers,
    workers: int = 1,
) -> dict[str, list[dict]]:
    """Fusion / clip-count / window / instruction / refine grids, one
    metrics row per configuration."""
    from dataclasses import replace

    from .evaluation import RECALL_THRESHOLDS, mean_iou, recall_at_iou

    def score(config: PipelineConfig, label: str) -> dict:
        predictions = run_batch(annotations, durations, config, providers, workers)
        pairs = [
            (p.moment, a.interval) for p, a in zip(predictions, annotations)
        ]
        report = EvalReport(
            count=len(pairs),
            recall_at={t: recall_at_iou(pairs, t) for t in RECALL_THRESHOLDS},
            mean_iou=mean_iou(pairs),
        )
        return _report_row(label, report)

    grid: dict[str, list[dict]] = {}
    grid["fusion"] = [
        score(replace(base, fusion=FusionMethod(m)), f"fusion({m})") for m in range(1, 6)
    ]
    grid["clips"] = [
        score(replace(base, clip_count=m), f"clips={m}") for m in ABLATION_CLIP_COUNTS
    ]
    grid["window"] = [
        score(replace(base, window=WindowSpec(w, s)), f"window=({w:g},{s:g})")
        for w, s in ABLATION_WINDOWS
    ]
    grid["instruction"] = [
        score(replace(base, granularities=(g,)), g.keyword) for g in Granularity
    ]
    grid["refine"] = [
        score(replace(base, refine=True), "refine=on"),
        score(replace(base, refine=False), "refine=off"),
    ]
    return grid


def cmd_ablate(args: argparse.Namespace) -> int:
    config_file = _load_config_file(args)
    base = build_pipeline_config(args, config_file)
    providers, _ = build_providers(args, config_file)
    fmt = _resolve(args, config_file, "format", "jsonl", str)
    durations = _load_durations(_resolve(args, config_file, "durations", None, str))
    load = load_annotations(args.annotations, fmt, durations)
    if not load.annotations:
        raise CliError(f"annotation file {args.annotations} holds no usable annotations")
    workers = _resolve(args, config_file, "workers", 1, int)

    grid = run_ablation_grid(load.annotations, durations, base, providers, workers)

    for section, rows in grid.items():
        print(f"== {section} ==", file=sys.stderr)
        for row in rows:
            recalls = " ".join(
                f"R@{t}={row['recall'][t]:.4f}" for t in sorted(row["recall"])
            )
            print(
                f"  {row['label']:<16} n={row['n']:<4} {recalls} "
                f"mIoU={row['miou']:.4f}",
                file=sys.stderr,
            )
    print(json.dumps(grid, sort_keys=True))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "ablation.json").open("w", encoding="utf-8") as fh:
            json.dump(grid, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags take precedence)")
    parser.add_argument("--provider", choices=["mock", "file", "http"])
    parser.add_argument("--endpoint", help="base URL of the caption/embed service")
    parser.add_argument("--cache", help="cache directory for captions and embeddings")
    parser.add_argument("--oracle", help="annotation file driving the oracle-mode mock")
    parser.add_argument("--mock-fixtures", dest="mock_fixtures",
                        help="caption fixtures JSONL for the mock provider")
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--max-retries", dest="max_retries", type=int)
    parser.add_argument("--fusion", type=int, choices=range(1, 6))
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--clips", type=int)
    parser.add_argument("--window-wide", dest="window_wide", type=float)
    parser.add_argument("--window-step", dest="window_step", type=float)
    parser.add_argument("--refine-gate-iou", dest="refine_gate_iou", type=float)
    parser.add_argument("--no-refine", dest="no_refine", action="store_const", const=True)
    parser.add_argument("--flush-tail", dest="flush_tail", action="store_const", const=True)
    parser.add_argument("--granularity",
                        choices=[g.keyword for g in Granularity],
                        help="restrict captioning to a single granularity")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--format", choices=["charades_sta", "jsonl"])
    parser.add_argument("--durations", help="JSON file mapping video_id to seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chatvtg",
        description="Zero-shot video temporal grounding and evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ground = sub.add_parser("ground", help="ground a single query")
    p_ground.add_argument("--video-id", required=True)
    p_ground.add_argument("--duration", type=float, required=True)
    p_ground.add_argument("--query", required=True)
    _add_common_flags(p_ground)
    p_ground.set_defaults(func=cmd_ground)

    p_batch = sub.add_parser("batch", help="ground every annotation in a file")
    p_batch.add_argument("--annotations", required=True)
    p_batch.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    p_eval = sub.add_parser("evaluate", help="score predictions against annotations")
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--annotations", required=True)
    p_eval.add_argument("--allow-partial", action="store_true")
    p_eval.add_argument("--per-query-csv", dest="per_query_csv")
    p_eval.add_argument("--out")
    _add_common_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_ablate = sub.add_parser("ablate", help="run the ablation config grid")
    p_ablate.add_argument("--annotations", required=True)
    p_ablate.add_argument("--out")
    _add_common_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ProviderUnavailableError, CacheMissError) as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (EvaluationError, FormatError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConsistencyError, ChatVTGError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
