import pytest

from chatvtg.core import Query, TimeInterval, VideoMeta, temporal_iou
from chatvtg.errors import CacheMissError, InvalidArgumentError
from chatvtg.providers import (
    MockEmbedder,
    OracleCaptionProvider,
    Providers,
)
from chatvtg.refinement import PipelineConfig, ground, ground_coarse, refine_moment



def oracle(video_id, gt, query, **kwargs):
    return Providers(
        OracleCaptionProvider({video_id: (gt, query)}, **kwargs),
        MockEmbedder(),
    )


QUERY = "a person opens a door"


class TestPipelineConfig:
    def test_defaults_match_reported_settings(self):
        config = PipelineConfig()
        assert config.clip_count == 5
        assert (config.window.wide, config.window.step) == (10.0, 5.0)
        assert config.refine_gate_iou == 0.7
        assert config.threshold == 0.8
        assert int(config.fusion) == 5
        assert config.refine is True
        assert config.flush_tail is False

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            PipelineConfig(clip_count=0)
        with pytest.raises(InvalidArgumentError):
            PipelineConfig(threshold=0.0)
        with pytest.raises(InvalidArgumentError):
            PipelineConfig(refine_gate_iou=1.5)
        with pytest.raises(InvalidArgumentError):
            PipelineConfig(granularities=())


class TestGroundCoarse:
    def test_oracle_recovers_grid_aligned_moment(self):
        video = VideoMeta("vid", 30.0)
        gt = TimeInterval(6.0, 18.0)
        coarse, scores = ground_coarse(
            video, Query(QUERY), PipelineConfig(), oracle("vid", gt, QUERY)
        )
        assert temporal_iou(coarse, gt) >= 0.5
        assert scores.scores[1] == scores.scores[2] == 1.0
        assert scores.scores[0] < 0.5 and scores.scores[4] < 0.5

    def test_single_clip_returns_whole_video(self):
        video = VideoMeta("vid", 30.0)
        coarse, _ = ground_coarse(
            video, Query(QUERY), PipelineConfig(clip_count=1),
            oracle("vid", TimeInterval(0, 30), QUERY),
        )
        assert coarse == TimeInterval(0, 30)

    def test_all_filler_falls_back_to_argmax(self):
        # Ground truth far outside every clip: all captions are filler, all
        # scores 0, argmax fallback returns the earliest clip.
        video = VideoMeta("vid", 30.0)
        providers = oracle("vid", TimeInterval(100.0, 110.0), QUERY)
        coarse, scores = ground_coarse(video, Query(QUERY), PipelineConfig(), providers)
        assert all(s == 0.0 for s in scores.scores)
        assert coarse == TimeInterval(0.0, 6.0)


class TestRefineMoment:
    def test_single_qualifying_window(self):
        video = VideoMeta("vid", 30.0)
        gt = TimeInterval(5.0, 15.0)
        refined = refine_moment(
            video, Query(QUERY), TimeInterval(5.0, 15.0), PipelineConfig(),
            oracle("vid", gt, QUERY),
        )
        assert refined == TimeInterval(5.0, 15.0)

    def test_no_qualifying_window_returns_coarse(self):
        video = VideoMeta("vid", 30.0)
        coarse = TimeInterval(0.0, 3.0)
        refined = refine_moment(
            video, Query(QUERY), coarse, PipelineConfig(),
            oracle("vid", TimeInterval(0.0, 3.0), QUERY),
        )
        assert refined == coarse

    def test_lowered_gate_picks_best_window(self):
        video = VideoMeta("vid", 30.0)
        gt = TimeInterval(5.0, 15.0)
        refined = refine_moment(
            video, Query(QUERY), TimeInterval(5.0, 15.0),
            PipelineConfig(refine_gate_iou=0.3),
            oracle("vid", gt, QUERY, overlap_fraction=0.9),
        )
        # Qualifying windows [0,10), [5,15), [10,20); only [5,15) overlaps the
        # ground truth by >= 0.9 of its own length.
        assert refined == TimeInterval(5.0, 15.0)

    def test_result_within_qualifying_windows(self):
        video = VideoMeta("vid", 30.0)
        coarse = TimeInterval(0.0, 12.0)
        refined = refine_moment(
            video, Query(QUERY), coarse, PipelineConfig(refine_gate_iou=0.3),
            oracle("vid", TimeInterval(0.0, 10.0), QUERY),
        )
        assert refined.start >= 0.0 and refined.end <= 20.0


class TestGround:
    def test_refine_false_passthrough(self):
        video = VideoMeta("vid", 30.0)
        gt = TimeInterval(6.0, 18.0)
        prediction = ground(
            video, Query(QUERY), PipelineConfig(refine=False),
            oracle("vid", gt, QUERY),
        )
        assert prediction.refined is False
        assert prediction.moment == prediction.coarse_moment

    def test_moment_within_video(self):
        video = VideoMeta("vid", 30.0)
        prediction = ground(
            video, Query(QUERY), PipelineConfig(),
            oracle("vid", TimeInterval(3.0, 22.0), QUERY),
        )
        assert 0.0 <= prediction.moment.start < prediction.moment.end <= 30.0

    def test_impossible_gate_equals_no_refine(self):
        video = VideoMeta("vid", 30.0)
        gt = TimeInterval(2.0, 14.0)
        with_gate = ground(
            video, Query(QUERY), PipelineConfig(refine_gate_iou=1.0),
            oracle("vid", gt, QUERY),
        )
        without = ground(
            video, Query(QUERY), PipelineConfig(refine=False),
            oracle("vid", gt, QUERY),
        )
        assert with_gate.moment == without.moment

    def test_provider_failure_names_context(self):
        video = VideoMeta("unknown", 30.0)
        providers = oracle("someother", TimeInterval(0, 10), QUERY)
        with pytest.raises(CacheMissError) as excinfo:
            ground(video, Query(QUERY), PipelineConfig(), providers)
        assert "unknown" in str(excinfo.value)

    def test_record_fields(self):
        video = VideoMeta("vid", 30.0)
        prediction = ground(
            video, Query(QUERY), PipelineConfig(),
            oracle("vid", TimeInterval(6.0, 18.0), QUERY),
        )
        record = prediction.to_record()
        assert set(record) == {
            "video_id", "query", "ts", "te", "coarse_ts", "coarse_te",
            "fusion", "refined",
        }
        assert record["fusion"] == 5


class TestWindowIouGate:
    def test_gate_excludes_exact_threshold(self):
        # tIoU exactly equal to the gate must not qualify: the gate is strict.
        video = VideoMeta("vid", 30.0)
        coarse = TimeInterval(5.0, 15.0)
        providers = oracle("vid", coarse, QUERY)
        refined = refine_moment(
            video, Query(QUERY), coarse,
            PipelineConfig(refine_gate_iou=1.0), providers,
        )
        # [5,15) has IoU exactly 1.0 with itself, not > 1.0: no window
        # qualifies and the coarse interval comes back unchanged.
        assert refined == coarse
