"""Seeded random-stream derivation.

All randomness in a run flows from one top-level seed. Components draw
from named sub-streams so that, e.g., changing how box jitter is sampled
never perturbs the appearance-noise stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return int(hashlib.sha256(part.encode("utf-8")).hexdigest()[:8], 16)
    if part < 0:
        raise ValueError(f"stream path components must be non-negative, got {part}")
    return int(part)


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the sub-stream named by `path` under `seed`.

    Pure: the same (seed, path) always yields an identically seeded
    generator, independent of any other stream.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed)] + [_key(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))
