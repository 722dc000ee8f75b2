"""Appearance features, cosine distance, and the dynamic target dictionary.

A feature is a plain 1-D float64 array. The embedding network itself is
out of scope here; anything that maps an AppearanceObservation to such an
array satisfies the Embedder contract (a CNN front-end would plug in the
same way the desk-scale embedders below do).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DimensionMismatchError, EmptyDictionaryError, ZeroVectorError

FeatureVector = np.ndarray

DEFAULT_DICT_CAPACITY = 32
DEFAULT_FRAME_GAP = 10


def as_feature(values, dim: int | None = None) -> FeatureVector:
    """Validate and convert `values` into a feature vector.

    Ensures a finite 1-D float64 array, optionally of dimension `dim`.
    """
    f = np.asarray(values, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError(f"feature must be 1-D, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature has non-finite components")
    if dim is not None and f.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {f.shape[0]}")
    return f


def cosine_distance(f: FeatureVector, g: FeatureVector) -> float:
    """1 - cosine similarity, in [0, 2]. Symmetric and scale invariant.

    Raises DimensionMismatchError for unequal dimensions and
    ZeroVectorError when either vector has zero norm.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != g.shape:
        raise DimensionMismatchError(f"dimensions differ: {f.shape[0]} vs {g.shape[0]}")
    nf = np.linalg.norm(f)
    ng = np.linalg.norm(g)
    if nf == 0.0 or ng == 0.0:
        raise ZeroVectorError("cosine distance undefined for zero-norm vectors")
    d = 1.0 - float(np.dot(f, g)) / (nf * ng)
    # guard rounding just outside the analytic range
    return min(max(d, 0.0), 2.0)


@dataclass(frozen=True)
class AppearanceObservation:
    """What an embedder sees for one box: a pixel patch or a simulator latent.

    Exactly one variant is present.
    """

    patch: np.ndarray | None = None
    latent: np.ndarray | None = None

    def __post_init__(self):
        if (self.patch is None) == (self.latent is None):
            raise ValueError("observation must carry exactly one of patch/latent")


class Embedder(Protocol):
    """Maps appearance observations to fixed-dimension feature vectors."""

    def embed(self, observation: AppearanceObservation) -> FeatureVector: ...


class IdentityEmbedder:
    """Passes simulator latents through, optionally with added Gaussian noise.

    With noise_sigma = 0 (default) embedding is a pure copy of the
    observed latent; a positive sigma models an imperfect feature
    extractor on top of the simulator's own observation noise.
    """

    def __init__(self, noise_sigma: float = 0.0, rng: np.random.Generator | None = None):
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        self.noise_sigma = noise_sigma
        self._rng = rng

    def embed(self, observation: AppearanceObservation) -> FeatureVector:
        if observation.latent is None:
            raise ValueError("identity embedder requires a latent observation")
        f = as_feature(observation.latent)
        if self.noise_sigma > 0.0:
            if self._rng is None:
                raise ValueError("noise_sigma > 0 requires a generator")
            f = f + self._rng.normal(0.0, self.noise_sigma, size=f.shape)
        return f


@dataclass
class TargetDictionary:
    """Running gallery of accepted target features.

    Entry 0 is the first-frame template feature and is never evicted;
    it is the only certainly-correct appearance sample. New features are
    admitted only at `frame_gap`-frame intervals, and when the gallery is
    full the oldest non-initial entry makes room.
    """

    capacity: int = DEFAULT_DICT_CAPACITY
    frame_gap: int = DEFAULT_FRAME_GAP
    normalize_before_mean: bool = False
    entries: list[FeatureVector] = field(default_factory=list)
    last_saved_frame: int | None = None

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.frame_gap < 1:
            raise ValueError("frame_gap must be >= 1")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dimension(self) -> int | None:
        return self.entries[0].shape[0] if self.entries else None

    def representative(self) -> FeatureVector:
        """Componentwise mean of the stored features.

        With normalize_before_mean, entries are L2-normalized first.
        """
        if not self.entries:
            raise EmptyDictionaryError("dictionary has no entries")
        stack = np.stack(self.entries)
        if self.normalize_before_mean:
            stack = stack / np.linalg.norm(stack, axis=1, keepdims=True)
        return stack.mean(axis=0)

    def maybe_insert(self, feature: FeatureVector, frame_index: int) -> bool:
        """Insert `feature` if the frame gap since the last save is met.

        Returns whether an insert happened. At capacity the oldest
        non-initial entry is evicted; a capacity-1 dictionary therefore
        never replaces its pinned template.
        """
        f = as_feature(feature, dim=self.dimension)
        if self.last_saved_frame is not None and frame_index - self.last_saved_frame < self.frame_gap:
            return False
        if len(self.entries) >= self.capacity:
            if self.capacity == 1:
                return False
            del self.entries[1]
        self.entries.append(f.copy())
        self.last_saved_frame = frame_index
        return True
