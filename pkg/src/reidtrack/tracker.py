"""Per-frame tracking state machine: propose, filter, embed, associate, update.

Two phases. While tracking, association fuses appearance with a positional
bias and an accepted match refreshes the state. A rejection (no surviving
candidate, or fused distance above threshold) flips to lost: the search
area then grows geometrically, matching falls back to appearance only
against a stricter threshold, and no box is reported until the target is
re-acquired.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .association import (
    DEFAULT_SCORE_THRESHOLD,
    AssociationConfig,
    DistanceBreakdown,
    filter_by_score,
    select,
)
from .embedding import (
    DEFAULT_DICT_CAPACITY,
    DEFAULT_FRAME_GAP,
    Embedder,
    TargetDictionary,
)
from .errors import InitFailedError, NoOverlapError, ReidTrackError, StepFailedError
from .geometry import BoundingBox, clip_to_frame, expand_region, full_frame_scale
from .providers import CandidateProvider, Frame, observation_for_box

DEFAULT_GROWTH_FACTOR = 1.3
RESULTS_MISSING_LINE = "NaN,NaN,NaN,NaN"


class Phase(Enum):
    TRACKING = "tracking"
    LOST = "lost"


@dataclass
class TrackerConfig:
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    association: AssociationConfig = field(default_factory=AssociationConfig)
    growth_factor: float = DEFAULT_GROWTH_FACTOR
    max_scale: float | None = None  # None: saturate at the full frame
    dictionary_capacity: int = DEFAULT_DICT_CAPACITY
    dictionary_frame_gap: int = DEFAULT_FRAME_GAP
    normalize_before_mean: bool = False
    hold_last_box: bool = False
    provider: str = "oracle"
    embedder: str = "identity"

    def __post_init__(self):
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError("score_threshold must lie in [0, 1]")
        if self.growth_factor <= 1.0:
            raise ValueError("growth_factor must be > 1")
        if self.max_scale is not None and self.max_scale < 1.0:
            raise ValueError("max_scale must be >= 1")


@dataclass
class TrackerState:
    phase: Phase
    lost_duration: int
    last_box: BoundingBox
    dictionary: TargetDictionary
    frame_index: int
    search_scale: float = 1.0


@dataclass(frozen=True)
class FrameOutput:
    """Per-frame result; box is present exactly when an association was accepted."""

    frame_index: int
    box: BoundingBox | None
    phase: Phase
    lost_duration: int
    breakdown: DistanceBreakdown | None


class Tracker:
    """One-pass tracker over a single sequence (strictly sequential per instance)."""

    def __init__(self, cfg: TrackerConfig, provider: CandidateProvider, embedder: Embedder):
        self.cfg = cfg
        self.provider = provider
        self.embedder = embedder

    def init(self, frame: Frame, initial_box: BoundingBox) -> TrackerState:
        """Seed the state from the first-frame box; its feature is pinned entry 0."""
        try:
            box = clip_to_frame(initial_box, frame.dims)
        except NoOverlapError as e:
            raise InitFailedError(f"initial box outside frame: {e}") from e
        self.provider.start(frame, box)
        feature = self.provider.initial_feature(frame, box)
        if feature is None:
            try:
                feature = self.embedder.embed(observation_for_box(frame, box))
            except (ReidTrackError, ValueError, LookupError) as e:
                raise InitFailedError(f"cannot embed initial patch: {e}") from e
        dictionary = TargetDictionary(
            capacity=self.cfg.dictionary_capacity,
            frame_gap=self.cfg.dictionary_frame_gap,
            normalize_before_mean=self.cfg.normalize_before_mean)
        dictionary.maybe_insert(feature, frame.index)
        return TrackerState(phase=Phase.TRACKING, lost_duration=0, last_box=box,
                            dictionary=dictionary, frame_index=frame.index,
                            search_scale=1.0)

    def step(self, state: TrackerState, frame: Frame) -> tuple[TrackerState, FrameOutput]:
        """Process one frame, mutating and returning the state.

        Provider or embedding failures surface as StepFailedError with the
        frame index; no state is touched before association succeeds.
        """
        if frame.index <= state.frame_index:
            raise ValueError(
                f"frame indices must increase: {frame.index} after {state.frame_index}")
        lost = state.phase is Phase.LOST
        try:
            region = expand_region(state.last_box, state.search_scale, frame.dims)
            candidates = self.provider.propose(frame, region)
            survivors = filter_by_score(candidates, self.cfg.score_threshold)
            for c in survivors:
                if c.feature is None:
                    c.feature = self.embedder.embed(observation_for_box(frame, c.box))
        except (ReidTrackError, ValueError, LookupError, OSError) as e:
            raise StepFailedError(frame.index, str(e)) from e

        prev_center = None if lost else state.last_box.center
        result = select(survivors, state.dictionary.representative(), prev_center,
                        self.cfg.association)

        if result.accepted:
            chosen = survivors[result.selected]
            state.phase = Phase.TRACKING
            state.lost_duration = 0
            state.last_box = chosen.box
            state.search_scale = 1.0
            state.dictionary.maybe_insert(chosen.feature, frame.index)
            out_box = chosen.box
        else:
            state.phase = Phase.LOST
            state.lost_duration += 1
            cap = (self.cfg.max_scale if self.cfg.max_scale is not None
                   else full_frame_scale(state.last_box, frame.dims))
            state.search_scale = min(state.search_scale * self.cfg.growth_factor, cap)
            out_box = None

        state.frame_index = frame.index
        return state, FrameOutput(frame_index=frame.index, box=out_box,
                                  phase=state.phase, lost_duration=state.lost_duration,
                                  breakdown=result.breakdown)

    def run_sequence(self, frames: Iterable[Frame],
                     initial_box: BoundingBox) -> list[FrameOutput]:
        """One-pass run: init on the first frame, step on the rest, no resets."""
        outputs: list[FrameOutput] = []
        state: TrackerState | None = None
        for frame in frames:
            if state is None:
                state = self.init(frame, initial_box)
                outputs.append(FrameOutput(frame_index=frame.index, box=state.last_box,
                                           phase=Phase.TRACKING, lost_duration=0,
                                           breakdown=None))
            else:
                state, out = self.step(state, frame)
                outputs.append(out)
        if state is None:
            raise ValueError("sequence must contain at least one frame")
        return outputs


def format_box_line(box: BoundingBox | None) -> str:
    """One results line: `x_min,y_min,w,h` or the NaN token for no box.

    Floats use repr so that parsing reproduces them exactly.
    """
    if box is None:
        return RESULTS_MISSING_LINE
    x, y, w, h = box.to_corner()
    return f"{x!r},{y!r},{w!r},{h!r}"


def write_results(path: str | Path, outputs: Sequence[FrameOutput],
                  header_lines: Sequence[str] = (),
                  hold_last_box: bool = False) -> None:
    """Write the per-frame results file (one line per frame).

    With hold_last_box, lost frames repeat the last accepted box instead
    of the NaN token (for benchmarks that penalize missing predictions).
    """
    lines = [f"# {h}" for h in header_lines]
    last: BoundingBox | None = None
    for out in outputs:
        if out.box is not None:
            last = out.box
        box = out.box if out.box is not None else (last if hold_last_box else None)
        lines.append(format_box_line(box))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
