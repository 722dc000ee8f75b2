import numpy as np
import pytest

from reidtrack.association import AssociationConfig, Candidate
from reidtrack.embedding import IdentityEmbedder
from reidtrack.errors import InitFailedError, StepFailedError
from reidtrack.evaluation import read_box_file
from reidtrack.geometry import BoundingBox, FrameDims, iou
from reidtrack.providers import CandidateProvider, OracleProvider
from reidtrack.simulator import ScenarioConfig, generate
from reidtrack.tracker import (
    FrameOutput,
    Phase,
    Tracker,
    TrackerConfig,
    format_box_line,
    write_results,
)

STUDY_ASSOCIATION = AssociationConfig(accept_threshold_tracking=0.25,
                                      accept_threshold_lost=0.18)


def study_tracker(seed, **overrides):
    cfg = TrackerConfig(score_threshold=0.5, association=STUDY_ASSOCIATION, **overrides)
    return Tracker(cfg, OracleProvider(seed=seed, jitter_sigma=0.3), IdentityEmbedder())


def scenario(**overrides):
    base = dict(frame_dims=FrameDims(160, 160), num_frames=60, num_confusers=2,
                confuser_similarity=0.6, occlusion_windows=[(20, 30)],
                appearance_noise_sigma=0.04, box_jitter_sigma=0.3, seed=17)
    base.update(overrides)
    return generate(ScenarioConfig(**base))


class TestInit:
    def test_dictionary_seeded_with_one_entry(self):
        sc = scenario()
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        assert state.phase is Phase.TRACKING
        assert len(state.dictionary) == 1
        assert state.search_scale == 1.0
        assert np.array_equal(state.dictionary.entries[0],
                              sc.frames[0].observations[0].latent)

    def test_box_outside_frame_fails(self):
        sc = scenario()
        tracker = study_tracker(17)
        with pytest.raises(InitFailedError):
            tracker.init(sc.frames[0], BoundingBox(500, 500, 10, 10))

    def test_deterministic(self):
        sc = scenario()
        a = study_tracker(17).init(sc.frames[0], sc.target.trajectory[0])
        b = study_tracker(17).init(sc.frames[0], sc.target.trajectory[0])
        assert a.last_box == b.last_box
        assert a.phase == b.phase
        assert np.array_equal(a.dictionary.entries[0], b.dictionary.entries[0])


class TestStep:
    def test_unobstructed_tracking(self):
        sc = scenario(occlusion_windows=[], num_confusers=0)
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        for frame in sc.frames[1:]:
            state, out = tracker.step(state, frame)
            assert out.phase is Phase.TRACKING
            assert out.box is not None
            assert iou(out.box, sc.target.trajectory[frame.index]) > 0.5

    def test_occlusion_flips_to_lost(self):
        sc = scenario(num_confusers=0)
        tracker = study_tracker(17, growth_factor=1.3)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        for frame in sc.frames[1:20]:
            state, out = tracker.step(state, frame)
        assert state.phase is Phase.TRACKING
        state, out = tracker.step(state, sc.frames[20])
        assert out.phase is Phase.LOST
        assert out.lost_duration == 1
        assert out.box is None
        assert state.search_scale == pytest.approx(1.3)

    def test_search_scale_monotone_and_reset(self):
        sc = scenario(num_confusers=0)
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        scales = []
        for frame in sc.frames[1:]:
            state, out = tracker.step(state, frame)
            scales.append((frame.index, state.search_scale, out.phase))
        lost_scales = [s for k, s, p in scales if 20 <= k < 30]
        assert all(b >= a for a, b in zip(lost_scales, lost_scales[1:]))
        # re-acquisition resets the growth
        k, s, p = scales[29]   # frame 30, first visible again
        assert p is Phase.TRACKING
        assert s == 1.0

    def test_reacquired_box_matches_ground_truth(self):
        sc = scenario()
        tracker = study_tracker(17)
        outs = tracker.run_sequence(sc.frames, sc.target.trajectory[0])
        reacquired = next(o for o in outs if o.frame_index >= 30 and o.box is not None)
        assert reacquired.frame_index == 30
        gt = sc.target.trajectory[30]
        assert iou(reacquired.box, gt) > 0.5

    def test_lost_mode_has_no_positional_breakdown(self):
        sc = scenario(num_confusers=2)
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        for frame in sc.frames[1:]:
            was_lost = state.phase is Phase.LOST
            state, out = tracker.step(state, frame)
            if was_lost and out.breakdown is not None:
                assert out.breakdown.positional_bias is None
                assert out.breakdown.positional_raw is None

    def test_dictionary_only_grows_on_accepted_frames(self):
        sc = scenario()
        tracker = study_tracker(17, dictionary_frame_gap=1)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        for frame in sc.frames[1:]:
            before = len(state.dictionary)
            state, out = tracker.step(state, frame)
            if out.box is None:
                assert len(state.dictionary) == before

    def test_frame_index_must_increase(self):
        sc = scenario()
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        state, _ = tracker.step(state, sc.frames[1])
        with pytest.raises(ValueError):
            tracker.step(state, sc.frames[1])

    def test_provider_failure_keeps_state(self):
        class FailingProvider(CandidateProvider):
            def propose(self, frame, region):
                raise OSError("backend unavailable")

        sc = scenario()
        tracker = study_tracker(17)
        state = tracker.init(sc.frames[0], sc.target.trajectory[0])
        tracker.provider = FailingProvider()
        snapshot = (state.phase, state.lost_duration, state.last_box,
                    state.frame_index, state.search_scale)
        with pytest.raises(StepFailedError) as err:
            tracker.step(state, sc.frames[1])
        assert err.value.frame_index == 1
        assert (state.phase, state.lost_duration, state.last_box,
                state.frame_index, state.search_scale) == snapshot


class TestRunSequence:
    def test_single_frame_returns_initial_box(self):
        sc = scenario()
        tracker = study_tracker(17)
        outs = tracker.run_sequence(sc.frames[:1], sc.target.trajectory[0])
        assert len(outs) == 1
        assert outs[0].box == sc.target.trajectory[0]
        assert outs[0].phase is Phase.TRACKING

    def test_output_length_matches_frames(self):
        sc = scenario()
        outs = study_tracker(17).run_sequence(sc.frames, sc.target.trajectory[0])
        assert len(outs) == len(sc.frames)

    def test_deterministic_repeat(self):
        sc = scenario()
        a = study_tracker(17).run_sequence(sc.frames, sc.target.trajectory[0])
        b = study_tracker(17).run_sequence(sc.frames, sc.target.trajectory[0])
        assert [(o.frame_index, o.box, o.phase, o.lost_duration) for o in a] == \
               [(o.frame_index, o.box, o.phase, o.lost_duration) for o in b]

    def test_box_present_iff_tracking(self):
        sc = scenario()
        outs = study_tracker(17).run_sequence(sc.frames, sc.target.trajectory[0])
        for out in outs:
            assert (out.box is not None) == (out.phase is Phase.TRACKING)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            study_tracker(17).run_sequence([], BoundingBox(5, 5, 2, 2))


class TestExternalProviderRun:
    """Tracking driven entirely by an interchange file with pre-computed features."""

    def test_file_features_skip_embedder(self, tmp_path):
        from reidtrack.providers import (
            ExternalCandidateRecord,
            ExternalFeaturesEmbedder,
            ExternalFileProvider,
            write_interchange,
        )

        sc = scenario(num_confusers=1, occlusion_windows=[], box_jitter_sigma=0.0)
        records = []
        for frame in sc.frames:
            for obs in frame.observations:
                records.append(ExternalCandidateRecord(
                    frame_index=frame.index,
                    x_min=obs.box.x_min, y_min=obs.box.y_min,
                    w=obs.box.w, h=obs.box.h,
                    score=0.9, feature=obs.latent))
        path = tmp_path / "candidates.jsonl"
        write_interchange(path, records)

        cfg = TrackerConfig(score_threshold=0.5, association=STUDY_ASSOCIATION,
                            provider="external", embedder="external")
        tracker = Tracker(cfg, ExternalFileProvider(path), ExternalFeaturesEmbedder())
        outs = tracker.run_sequence(sc.frames, sc.target.trajectory[0])
        assert all(o.box is not None for o in outs)
        assert all(iou(o.box, sc.target.trajectory[o.frame_index]) > 0.9
                   for o in outs)

    def test_init_fails_without_file_feature(self, tmp_path):
        from reidtrack.providers import ExternalFeaturesEmbedder, ExternalFileProvider

        sc = scenario()
        path = tmp_path / "candidates.jsonl"
        path.write_text("")   # no records at all
        cfg = TrackerConfig(provider="external", embedder="external")
        tracker = Tracker(cfg, ExternalFileProvider(path), ExternalFeaturesEmbedder())
        with pytest.raises(InitFailedError):
            tracker.init(sc.frames[0], sc.target.trajectory[0])


class TestResultsFile:
    def outputs(self):
        box = BoundingBox.from_corner(10.0, 20.0, 30.0, 40.0)
        return [
            FrameOutput(0, box, Phase.TRACKING, 0, None),
            FrameOutput(1, None, Phase.LOST, 1, None),
            FrameOutput(2, BoundingBox.from_corner(11.5, 21.5, 30.0, 40.0),
                        Phase.TRACKING, 0, None),
        ]

    def test_format_line(self):
        assert format_box_line(None) == "NaN,NaN,NaN,NaN"
        assert format_box_line(BoundingBox.from_corner(1.5, 2.0, 3.0, 4.0)) == "1.5,2.0,3.0,4.0"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "results.txt"
        write_results(path, self.outputs(), header_lines=["test run"])
        boxes = read_box_file(path)
        assert boxes[0] == BoundingBox.from_corner(10.0, 20.0, 30.0, 40.0)
        assert boxes[1] is None
        assert boxes[2] == BoundingBox.from_corner(11.5, 21.5, 30.0, 40.0)

    def test_hold_last_box(self, tmp_path):
        path = tmp_path / "results.txt"
        write_results(path, self.outputs(), hold_last_box=True)
        boxes = read_box_file(path)
        assert boxes[1] == boxes[0]
