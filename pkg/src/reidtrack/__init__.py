"""Confuser-aware single-object tracking with re-identification features."""

__version__ = "0.1.0"

from .association import (
    AssociationConfig,
    AssociationResult,
    Candidate,
    DistanceBreakdown,
    filter_by_score,
    fuse,
    select,
)
from .embedding import TargetDictionary, cosine_distance
from .geometry import Anchor, BoundingBox, FrameDims, RegressionDelta, SearchRegion
from .simulator import Scenario, ScenarioConfig, generate
from .tracker import FrameOutput, Phase, Tracker, TrackerConfig, TrackerState

__all__ = [
    "__version__",
    "Anchor",
    "AssociationConfig",
    "AssociationResult",
    "BoundingBox",
    "Candidate",
    "DistanceBreakdown",
    "FrameDims",
    "FrameOutput",
    "Phase",
    "RegressionDelta",
    "Scenario",
    "ScenarioConfig",
    "SearchRegion",
    "TargetDictionary",
    "Tracker",
    "TrackerConfig",
    "TrackerState",
    "cosine_distance",
    "filter_by_score",
    "fuse",
    "generate",
    "select",
]
