"""Caption and embedding providers: deterministic mock, file replay, remote HTTP.

All providers are safe to call from multiple worker threads; the JSONL cache
serializes its writes internally. Results never depend on call interleaving.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .core import (
    ALL_GRANULARITIES,
    CaptionSet,
    EmbeddingVector,
    Granularity,
    TimeInterval,
)
from .errors import (
    CacheMissError,
    ConsistencyError,
    InvalidArgumentError,
    ProviderUnavailableError,
)

MOCK_EMBED_DIM = 256
# FNV-1a 32-bit parameters; the bridge stub uses the same constants so the
# two embedders agree elementwise.
_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619
_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class CaptionRequest:
    video_id: str
    segment: TimeInterval
    granularity: Granularity

    def cache_key(self) -> tuple[str, float, float, str]:
        start, end = self.segment.key()
        return (self.video_id, start, end, self.granularity.keyword)


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # mock | file | http
    endpoint: str | None = None
    cache_path: str | None = None
    timeout: float = 30.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "file", "http"):
            raise InvalidArgumentError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise InvalidArgumentError("http provider requires an endpoint")
        if self.kind == "file" and not self.cache_path:
            raise InvalidArgumentError("file provider requires a cache path")


class CaptionProvider(Protocol):
    def caption(self, request: CaptionRequest) -> str: ...


class Embedder(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def _fnv1a(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


def hashed_bag_embedding(text: str, dimension: int = MOCK_EMBED_DIM) -> EmbeddingVector:
    """L2-normalized hashed bag-of-tokens vector.

    Token-disjoint strings get orthogonal vectors unless two tokens collide
    in the hash space; the fixtures used in tests are collision-checked.
    """
    if not text.strip():
        raise InvalidArgumentError("cannot embed empty text")
    counts = [0.0] * dimension
    for token in tokenize(text):
        counts[_fnv1a(token) % dimension] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm > 0:
        counts = [c / norm for c in counts]
    return EmbeddingVector(tuple(counts))


class MockEmbedder:
    """Deterministic embedder used for tests and the synthetic corpus."""

    def __init__(self, dimension: int = MOCK_EMBED_DIM) -> None:
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        return hashed_bag_embedding(text, self.dimension)


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class _JsonlStore:
    """Append-only JSONL key/value store; last write wins on duplicate keys."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self._lock = threading.Lock()
        self._entries: dict = {}
        if path.exists():
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._entries[self._key_of(record)] = record

    @staticmethod
    def _key_of(record: dict):
        if "text_sha256" in record:
            return ("embed", record["text_sha256"])
        return (
            "caption",
            record["video_id"],
            record["start"],
            record["end"],
            record["granularity"],
        )

    def get(self, key):
        with self._lock:
            return self._entries.get(key)

    def put(self, record: dict) -> None:
        with self._lock:
            self._entries[self._key_of(record)] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _caption_record(request: CaptionRequest, caption: str) -> dict:
    video_id, start, end, granularity = request.cache_key()
    return {
        "video_id": video_id,
        "start": start,
        "end": end,
        "granularity": granularity,
        "caption": caption,
    }


def _caption_store_key(request: CaptionRequest):
    video_id, start, end, granularity = request.cache_key()
    return ("caption", video_id, start, end, granularity)


class FileCaptionProvider:
    """Replay-only provider backed by a previously written cache file."""

    def __init__(self, cache_path: str | Path) -> None:
        self._store = _JsonlStore(Path(cache_path))

    def caption(self, request: CaptionRequest) -> str:
        record = self._store.get(_caption_store_key(request))
        if record is None:
            raise CacheMissError(
                f"no cached caption for video={request.video_id} "
                f"segment={request.segment} granularity={request.granularity.keyword}"
            )
        return record["caption"]


class FileEmbedder:
    def __init__(self, cache_path: str | Path) -> None:
        self._store = _JsonlStore(Path(cache_path))

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise InvalidArgumentError("cannot embed empty text")
        record = self._store.get(("embed", text_sha256(text)))
        if record is None:
            raise CacheMissError(f"no cached embedding for text {text[:60]!r}")
        return EmbeddingVector(tuple(float(v) for v in record["vector"]))


class CachingCaptionProvider:
    """Read-through cache in front of another caption provider."""

    def __init__(self, inner: CaptionProvider, cache_path: str | Path) -> None:
        self._inner = inner
        self._store = _JsonlStore(Path(cache_path))

    def caption(self, request: CaptionRequest) -> str:
        record = self._store.get(_caption_store_key(request))
        if record is not None:
            return record["caption"]
        caption = self._inner.caption(request)
        self._store.put(_caption_record(request, caption))
        return caption


class CachingEmbedder:
    def __init__(self, inner: Embedder, cache_path: str | Path) -> None:
        self._inner = inner
        self._store = _JsonlStore(Path(cache_path))

    def embed(self, text: str) -> EmbeddingVector:
        key = ("embed", text_sha256(text))
        record = self._store.get(key)
        if record is not None:
            return EmbeddingVector(tuple(float(v) for v in record["vector"]))
        vector = self._inner.embed(text)
        self._store.put({"text_sha256": text_sha256(text), "vector": list(vector.values)})
        return vector


class MockCaptionProvider:
    """Fixture-replay captioner.

    Fixtures map (video_id, start, end, granularity keyword) to caption text,
    with start/end rounded to the cache precision. Missing keys raise in
    strict mode and return the filler text otherwise.
    """

    def __init__(
        self,
        fixtures: dict[tuple[str, float, float, str], str],
        strict: bool = True,
        filler: str = "",
    ) -> None:
        self._fixtures = fixtures
        self._strict = strict
        self._filler = filler

    def caption(self, request: CaptionRequest) -> str:
        key = request.cache_key()
        if key in self._fixtures:
            return self._fixtures[key]
        if self._strict:
            raise CacheMissError(
                f"no fixture caption for video={request.video_id} "
                f"segment={request.segment} granularity={request.granularity.keyword}"
            )
        return self._filler


DEFAULT_FILLER = "unrelated background footage with nothing of note happening"


class OracleCaptionProvider:
    """Captioner that knows the ground truth, for synthetic end-to-end runs.

    Segments overlapping the ground-truth interval by at least
    ``overlap_fraction`` of their own length get the query text verbatim;
    everything else gets filler. This makes pipeline behavior analytically
    predictable under the hashed mock embedder.
    """

    def __init__(
        self,
        ground_truth: dict[str, tuple[TimeInterval, str]],
        overlap_fraction: float = 0.5,
        filler: str = DEFAULT_FILLER,
    ) -> None:
        if not 0 < overlap_fraction <= 1:
            raise InvalidArgumentError("overlap_fraction must be in (0, 1]")
        self._gt = ground_truth
        self._fraction = overlap_fraction
        self._filler = filler

    def caption(self, request: CaptionRequest) -> str:
        entry = self._gt.get(request.video_id)
        if entry is None:
            raise CacheMissError(f"no ground truth for video {request.video_id!r}")
        interval, query_text = entry
        overlap = max(
            0.0,
            min(request.segment.end, interval.end)
            - max(request.segment.start, interval.start),
        )
        if overlap / request.segment.length >= self._fraction:
            return query_text
        return self._filler


class HttpCaptionProvider:
    """Remote captioner speaking the POST /caption JSON protocol."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def caption(self, request: CaptionRequest) -> str:
        body = {
            "video_id": request.video_id,
            "start": request.segment.start,
            "end": request.segment.end,
            "instruction": request.granularity.instruction,
        }
        payload = _post_with_retries(
            self._session,
            f"{self.endpoint}/caption",
            body,
            self.timeout,
            self.max_retries,
            self.backoff,
            context=(
                f"caption video={request.video_id} segment={request.segment} "
                f"granularity={request.granularity.keyword}"
            ),
        )
        return str(payload["caption"])


class HttpEmbedder:
    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._session = session or requests.Session()
        self._dimension: int | None = None
        self._dim_lock = threading.Lock()

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise InvalidArgumentError("cannot embed empty text")
        payload = _post_with_retries(
            self._session,
            f"{self.endpoint}/embed",
            {"text": text},
            self.timeout,
            self.max_retries,
            self.backoff,
            context=f"embed text={text[:60]!r}",
        )
        vector = EmbeddingVector(tuple(float(v) for v in payload["vector"]))
        with self._dim_lock:
            if self._dimension is None:
                self._dimension = vector.dimension
            elif vector.dimension != self._dimension:
                raise ConsistencyError(
                    f"embedding dimension changed mid-run: "
                    f"{self._dimension} -> {vector.dimension}"
                )
        return vector


def _post_with_retries(
    session: requests.Session,
    url: str,
    body: dict,
    timeout: float,
    max_retries: int,
    backoff: float,
    context: str,
) -> dict:
    last_error: Exception | None = None
    for attempt in range(max_retries):
        try:
            response = session.post(url, json=body, timeout=timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
            if attempt + 1 < max_retries:
                time.sleep(backoff * (2**attempt))
    raise ProviderUnavailableError(
        f"{url} failed after {max_retries} attempts ({context}): {last_error}"
    )


@dataclass
class Providers:
    """Captioner/embedder pair threaded through the pipeline."""

    captioner: CaptionProvider
    embedder: Embedder


def caption_segment_all(
    captioner: CaptionProvider,
    video_id: str,
    segment: TimeInterval,
    granularities: Iterable[Granularity] = ALL_GRANULARITIES,
) -> CaptionSet:
    """One caption call per granularity, assembled into a complete CaptionSet.

    The first provider error propagates; already-captioned granularities stay
    in the cache (when one is configured) but the partial set is discarded.
    """
    captions: dict[Granularity, str] = {}
    for granularity in granularities:
        captions[granularity] = captioner.caption(
            CaptionRequest(video_id, segment, granularity)
        )
    return CaptionSet(segment, captions)
