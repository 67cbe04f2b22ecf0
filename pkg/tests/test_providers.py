import json
import threading

import pytest

from chatvtg.core import Granularity, TimeInterval
from chatvtg.errors import (
    CacheMissError,
    InvalidArgumentError,
    ProviderUnavailableError,
)
from chatvtg.matching import cosine_similarity
from chatvtg.providers import (
    CachingCaptionProvider,
    CachingEmbedder,
    CaptionRequest,
    FileCaptionProvider,
    FileEmbedder,
    HttpCaptionProvider,
    MockCaptionProvider,
    MockEmbedder,
    OracleCaptionProvider,
    ProviderConfig,
    caption_segment_all,
    hashed_bag_embedding,
    tokenize,
)
from http_contract import CaptionEmbedContract


SEG = TimeInterval(0.0, 6.0)


def fixture_key(video_id, start, end, granularity):
    return (video_id, round(start, 3), round(end, 3), granularity)


class TestProviderConfig:
    def test_http_requires_endpoint(self):
        with pytest.raises(InvalidArgumentError):
            ProviderConfig(kind="http")

    def test_file_requires_cache_path(self):
        with pytest.raises(InvalidArgumentError):
            ProviderConfig(kind="file")

    def test_mock_needs_nothing(self):
        assert ProviderConfig(kind="mock").kind == "mock"


class TestMockEmbedder:
    def test_identical_strings_cosine_one(self):
        embedder = MockEmbedder()
        a = embedder.embed("a person opens a door")
        b = embedder.embed("a person opens a door")
        assert cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_token_disjoint_strings_cosine_zero(self):
        embedder = MockEmbedder()
        a = embedder.embed("person opens door")
        b = embedder.embed("galaxy rotation curve")
        # Token sets are disjoint and collision-free under the fixed hash.
        assert cosine_similarity(a, b) == 0.0

    def test_order_insensitive(self):
        embedder = MockEmbedder()
        assert embedder.embed("opens door person").values == \
            embedder.embed("person opens door").values

    def test_punctuation_and_case_stripped(self):
        embedder = MockEmbedder()
        assert embedder.embed("Person, opens; DOOR!").values == \
            embedder.embed("person opens door").values

    def test_unit_norm(self):
        vector = hashed_bag_embedding("several different tokens here")
        assert sum(v * v for v in vector.values) == pytest.approx(1.0, abs=1e-12)

    def test_dimension_256(self):
        assert MockEmbedder().embed("x").dimension == 256

    def test_empty_text_rejected(self):
        with pytest.raises(InvalidArgumentError):
            MockEmbedder().embed("   ")

    def test_tokenize(self):
        assert tokenize("A person, opens-the DOOR!") == \
            ["a", "person", "opens", "the", "door"]


class TestMockCaptionProvider:
    def test_fixture_replay(self):
        provider = MockCaptionProvider(
            {fixture_key("vidA", 0, 6, "action"): "a person opens a door"}
        )
        caption = provider.caption(CaptionRequest("vidA", SEG, Granularity.ACTION))
        assert caption == "a person opens a door"

    def test_strict_miss_raises(self):
        provider = MockCaptionProvider({})
        with pytest.raises(CacheMissError):
            provider.caption(CaptionRequest("vidA", SEG, Granularity.EMOTION))

    def test_caption_segment_all_complete(self):
        fixtures = {
            fixture_key("v", 0, 6, g.keyword): f"caption {g.keyword}"
            for g in Granularity
        }
        caption_set = caption_segment_all(MockCaptionProvider(fixtures), "v", SEG)
        assert len(caption_set.captions) == 5

    def test_caption_segment_all_missing_key_raises(self):
        fixtures = {
            fixture_key("v", 0, 6, g.keyword): "c"
            for g in Granularity if g is not Granularity.EMOTION
        }
        with pytest.raises(CacheMissError):
            caption_segment_all(MockCaptionProvider(fixtures), "v", SEG)


class TestOracleCaptionProvider:
    def test_overlapping_segment_gets_query(self):
        provider = OracleCaptionProvider(
            {"v": (TimeInterval(0, 10), "the query text")}, overlap_fraction=0.5
        )
        assert provider.caption(
            CaptionRequest("v", TimeInterval(0, 6), Granularity.ACTION)
        ) == "the query text"

    def test_disjoint_segment_gets_filler(self):
        provider = OracleCaptionProvider(
            {"v": (TimeInterval(0, 10), "the query text")}, filler="nothing here"
        )
        assert provider.caption(
            CaptionRequest("v", TimeInterval(20, 26), Granularity.ACTION)
        ) == "nothing here"

    def test_fraction_boundary_inclusive(self):
        provider = OracleCaptionProvider(
            {"v": (TimeInterval(0, 3), "q")}, overlap_fraction=0.5
        )
        assert provider.caption(
            CaptionRequest("v", TimeInterval(0, 6), Granularity.ACTION)
        ) == "q"


class TestFileProviders:
    def test_caption_replay_and_miss(self, tmp_path):
        cache = tmp_path / "captions.jsonl"
        cache.write_text(json.dumps({
            "video_id": "v", "start": 0.0, "end": 6.0,
            "granularity": "action", "caption": "cached caption",
        }) + "\n")
        provider = FileCaptionProvider(cache)
        assert provider.caption(
            CaptionRequest("v", SEG, Granularity.ACTION)
        ) == "cached caption"
        with pytest.raises(CacheMissError):
            provider.caption(CaptionRequest("v", SEG, Granularity.PLACE))

    def test_embed_replay(self, tmp_path):
        cache = tmp_path / "embeddings.jsonl"
        mock = MockEmbedder()
        caching = CachingEmbedder(mock, cache)
        original = caching.embed("some sentence")
        replay = FileEmbedder(cache).embed("some sentence")
        assert replay.values == original.values
        with pytest.raises(CacheMissError):
            FileEmbedder(cache).embed("never embedded")

    def test_embed_fixture_vector(self, tmp_path):
        from chatvtg.providers import text_sha256
        cache = tmp_path / "embeddings.jsonl"
        cache.write_text(json.dumps({
            "text_sha256": text_sha256("k"), "vector": [0.6, 0.8],
        }) + "\n")
        assert FileEmbedder(cache).embed("k").values == (0.6, 0.8)

    def test_last_write_wins(self, tmp_path):
        cache = tmp_path / "captions.jsonl"
        record = {"video_id": "v", "start": 0.0, "end": 6.0, "granularity": "action"}
        with cache.open("w") as fh:
            fh.write(json.dumps({**record, "caption": "old"}) + "\n")
            fh.write(json.dumps({**record, "caption": "new"}) + "\n")
        provider = FileCaptionProvider(cache)
        assert provider.caption(
            CaptionRequest("v", SEG, Granularity.ACTION)
        ) == "new"


class CountingCaptioner:
    def __init__(self, caption="generated"):
        self.calls = 0
        self._caption = caption

    def caption(self, request):
        self.calls += 1
        return f"{self._caption} {request.granularity.keyword}"


class FailingCaptioner:
    def caption(self, request):
        raise ProviderUnavailableError("backend down")


class TestCachingLayer:
    def test_second_call_served_from_cache(self, tmp_path):
        inner = CountingCaptioner()
        provider = CachingCaptionProvider(inner, tmp_path / "captions.jsonl")
        request = CaptionRequest("v", SEG, Granularity.ACTION)
        first = provider.caption(request)
        second = provider.caption(request)
        assert first == second and inner.calls == 1

    def test_cache_soundness_failing_inner(self, tmp_path):
        cache = tmp_path / "captions.jsonl"
        warm = CachingCaptionProvider(CountingCaptioner(), cache)
        for g in Granularity:
            warm.caption(CaptionRequest("v", SEG, g))
        cold = CachingCaptionProvider(FailingCaptioner(), cache)
        for g in Granularity:
            assert cold.caption(CaptionRequest("v", SEG, g)).endswith(g.keyword)

    def test_concurrent_writes_consistent(self, tmp_path):
        cache = tmp_path / "captions.jsonl"
        provider = CachingCaptionProvider(CountingCaptioner(), cache)
        requests_ = [
            CaptionRequest(f"v{i}", TimeInterval(i, i + 6), g)
            for i in range(8) for g in Granularity
        ]
        results: dict = {}

        def worker(reqs):
            for r in reqs:
                results[r] = provider.caption(r)

        threads = [
            threading.Thread(target=worker, args=(requests_,)) for _ in range(4)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        replay = FileCaptionProvider(cache)
        for r in requests_:
            assert replay.caption(r) == results[r]


class TestHttpAgainstStub(CaptionEmbedContract):
    @pytest.fixture
    def endpoint(self, stub_endpoint):
        return stub_endpoint

    def test_dead_endpoint_raises_provider_unavailable(self):
        provider = HttpCaptionProvider(
            "http://127.0.0.1:9", timeout=0.2, max_retries=2, backoff=0.0
        )
        with pytest.raises(ProviderUnavailableError) as excinfo:
            provider.caption(CaptionRequest("vid", SEG, Granularity.ACTION))
        assert "vid" in str(excinfo.value)


class TestReplayDeterminism:
    def test_two_runs_byte_identical(self, tmp_path):
        from chatvtg.core import Query, VideoMeta
        from chatvtg.refinement import PipelineConfig, ground
        from chatvtg.synthetic import generate_corpus, oracle_providers
        from chatvtg.providers import Providers

        videos = generate_corpus(count=4, seed=3)
        base = oracle_providers(videos)

        def run(cache_dir):
            providers = Providers(
                CachingCaptionProvider(base.captioner, cache_dir / "captions.jsonl"),
                CachingEmbedder(base.embedder, cache_dir / "embeddings.jsonl"),
            )
            records = []
            for v in videos:
                p = ground(VideoMeta(v.video_id, v.duration), Query(v.query),
                           PipelineConfig(), providers)
                records.append(json.dumps(p.to_record()))
            return records, (cache_dir / "captions.jsonl").read_text()

        first_records, _ = run(tmp_path / "a")
        second_records, _ = run(tmp_path / "a")  # warm cache, same directory
        third_records, _ = run(tmp_path / "b")   # cold cache
        assert first_records == second_records == third_records
