"""Candidate filtering and appearance/position distance fusion.

Given N candidate boxes, the engine scores each one by cosine distance
between its feature and the target-dictionary representative, optionally
adds a min-max-normalized positional bias, and trusts the argmin only if
its fused distance passes the mode-appropriate acceptance threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import FeatureVector, cosine_distance
from .errors import MissingFeatureError
from .geometry import BoundingBox

DEFAULT_EPSILON = 1e-6
DEFAULT_ACCEPT_TRACKING = 0.6
DEFAULT_ACCEPT_LOST = 0.35
DEFAULT_SCORE_THRESHOLD = 0.6


@dataclass
class Candidate:
    """A scored box proposal; the feature is attached after embedding."""

    box: BoundingBox
    score: float
    feature: FeatureVector | None = None

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"candidate score must be finite, got {self.score}")


@dataclass(frozen=True)
class DistanceBreakdown:
    """Per-candidate distances behind one association decision.

    positional_raw / positional_bias are None whenever the positional
    bias was not applied (lost mode, or bias disabled); in that case
    fused equals appearance.
    """

    appearance: np.ndarray
    positional_raw: np.ndarray | None
    positional_bias: np.ndarray | None
    fused: np.ndarray

    def __post_init__(self):
        for arr in (self.appearance, self.positional_raw, self.positional_bias, self.fused):
            if arr is not None:
                arr.setflags(write=False)


@dataclass(frozen=True)
class AssociationResult:
    selected: int | None
    breakdown: DistanceBreakdown | None
    accepted: bool


@dataclass
class AssociationConfig:
    """Knobs of the distance fusion and acceptance test.

    use_appearance = False is the ablation switch: appearance distance is
    replaced by (1 - classification score), so selection degenerates to
    position/score only.
    """

    epsilon: float = DEFAULT_EPSILON
    accept_threshold_tracking: float = DEFAULT_ACCEPT_TRACKING
    accept_threshold_lost: float = DEFAULT_ACCEPT_LOST
    use_positional_bias: bool = True
    use_appearance: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        for name in ("accept_threshold_tracking", "accept_threshold_lost"):
            t = getattr(self, name)
            if not (0 < t <= 2):
                raise ValueError(f"{name} must lie in (0, 2], got {t}")


def filter_by_score(candidates: list[Candidate], tau: float) -> list[Candidate]:
    """Keep candidates with score >= tau (boundary inclusive), preserving order."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return [c for c in candidates if c.score >= tau]


def appearance_distances(candidates: list[Candidate], rep: FeatureVector) -> np.ndarray:
    """Cosine distance of every candidate feature to the representative."""
    if not candidates:
        raise ValueError("appearance distances need at least one candidate")
    for i, c in enumerate(candidates):
        if c.feature is None:
            raise MissingFeatureError(f"candidate {i} has no feature attached")
    return np.array([cosine_distance(c.feature, rep) for c in candidates])


def positional_distances(candidates: list[Candidate],
                         prev_center: tuple[float, float]) -> np.ndarray:
    """Euclidean distance from the previous center to each candidate center."""
    if not candidates:
        raise ValueError("positional distances need at least one candidate")
    px, py = prev_center
    return np.array([np.hypot(c.box.cx - px, c.box.cy - py) for c in candidates])


def fuse(appearance: np.ndarray, positional: np.ndarray,
         epsilon: float = DEFAULT_EPSILON) -> tuple[np.ndarray, np.ndarray]:
    """Fused distance: appearance plus min-max-normalized positional bias.

    bias_i = (d_e_i - min(D_e)) / (max(D_e) - min(D_e) + epsilon), so the
    bias lies in [0, 1) and vanishes identically when all positional
    distances agree (including N = 1).
    """
    d_a = np.asarray(appearance, dtype=np.float64)
    d_e = np.asarray(positional, dtype=np.float64)
    if d_a.shape != d_e.shape or d_a.ndim != 1 or d_a.size < 1:
        raise ValueError(f"distance sets must be equal-length 1-D, got {d_a.shape} vs {d_e.shape}")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    lo = d_e.min()
    hi = d_e.max()
    bias = (d_e - lo) / (hi - lo + epsilon)
    return bias, d_a + bias


def select(candidates: list[Candidate], rep: FeatureVector,
           prev_center: tuple[float, float] | None,
           cfg: AssociationConfig) -> AssociationResult:
    """Pick the candidate with minimal fused distance and test acceptance.

    prev_center present means tracking mode: the positional bias is added
    (when enabled) and the tracking threshold gates acceptance. With
    prev_center None (re-acquisition) matching is appearance-only against
    the lost threshold. Ties go to the lowest index.
    """
    if not candidates:
        return AssociationResult(selected=None, breakdown=None, accepted=False)
    if cfg.use_appearance:
        d_a = appearance_distances(candidates, rep)
    else:
        d_a = np.array([1.0 - c.score for c in candidates])
    if cfg.use_positional_bias and prev_center is not None:
        d_e = positional_distances(candidates, prev_center)
        bias, fused = fuse(d_a, d_e, cfg.epsilon)
        breakdown = DistanceBreakdown(d_a, d_e, bias, fused)
    else:
        breakdown = DistanceBreakdown(d_a, None, None, d_a.copy())
    selected = int(np.argmin(breakdown.fused))
    threshold = (cfg.accept_threshold_lost if prev_center is None
                 else cfg.accept_threshold_tracking)
    accepted = bool(breakdown.fused[selected] <= threshold)
    return AssociationResult(selected=selected, breakdown=breakdown, accepted=accepted)
