"""Seeded synthetic scenarios: a target, look-alike confusers, occlusions.

Everything is a pure function of the configuration (seed included), so a
scenario regenerates bit-for-bit and can be pinned as a JSON fixture.
Confuser latents are placed at a controlled cosine similarity to the
target latent, which is what makes confuser rejection measurable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import InfeasibleConfigError
from .geometry import BoundingBox, FrameDims
from .providers import Frame, SimObservation
from .rng import substream

DEFAULT_LATENT_DIM = 64
# confuser similarity is dithered uniformly by up to this much
SIMILARITY_BAND = 0.015
_PLACEMENT_ATTEMPTS = 200


@dataclass
class ScenarioConfig:
    frame_dims: FrameDims = field(default_factory=lambda: FrameDims(200, 200))
    num_frames: int = 100
    num_confusers: int = 0
    confuser_similarity: float = 0.7
    occlusion_windows: list[tuple[int, int]] = field(default_factory=list)
    appearance_noise_sigma: float = 0.0
    speed: float = 2.0
    direction_change_prob: float = 0.1
    box_jitter_sigma: float = 0.0
    object_width: float = 20.0
    object_height: float = 20.0
    latent_dim: int = DEFAULT_LATENT_DIM
    seed: int = 0

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if self.num_confusers < 0:
            raise ValueError("num_confusers must be >= 0")
        if not (0.0 <= self.confuser_similarity < 1.0):
            raise ValueError("confuser_similarity must lie in [0, 1)")
        if self.appearance_noise_sigma < 0 or self.box_jitter_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not (0.0 <= self.direction_change_prob <= 1.0):
            raise ValueError("direction_change_prob must lie in [0, 1]")
        if self.object_width <= 0 or self.object_height <= 0:
            raise ValueError("object size must be positive")
        if self.latent_dim < 2:
            raise ValueError("latent_dim must be >= 2")
        for start, end in self.occlusion_windows:
            if not (0 <= start < end <= self.num_frames):
                raise ValueError(
                    f"occlusion window [{start}, {end}) outside [0, {self.num_frames})")


@dataclass
class SimObject:
    """One simulated object: unit-norm identity latent plus its trajectory."""

    object_id: int
    latent: np.ndarray
    trajectory: list[BoundingBox]
    visible: list[bool]


@dataclass
class Scenario:
    config: ScenarioConfig
    objects: list[SimObject]
    frames: list[Frame]

    @property
    def target(self) -> SimObject:
        return self.objects[0]


def _occluded(config: ScenarioConfig, frame_index: int) -> bool:
    return any(start <= frame_index < end for start, end in config.occlusion_windows)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _confuser_latent(target: np.ndarray, similarity: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Latent at cosine similarity ~= `similarity` to the target.

    Built exactly in the plane spanned by the target and a random
    orthogonal direction, with a small uniform dither on the similarity;
    measured similarity stays within +/- 0.02 of the request.
    """
    ortho = rng.normal(size=target.shape)
    ortho -= (ortho @ target) * target
    ortho = _unit(ortho)
    s = similarity + rng.uniform(-SIMILARITY_BAND, SIMILARITY_BAND)
    s = min(max(s, -0.999), 0.999)
    return s * target + np.sqrt(1.0 - s * s) * ortho


def _initial_centers(config: ScenarioConfig, rng: np.random.Generator) -> list[tuple[float, float]]:
    dims = config.frame_dims
    w, h = config.object_width, config.object_height
    if w > dims.width or h > dims.height:
        raise InfeasibleConfigError(
            f"object {w}x{h} does not fit in frame {dims.width}x{dims.height}")
    placed: list[BoundingBox] = []
    centers: list[tuple[float, float]] = []
    for i in range(1 + config.num_confusers):
        for _ in range(_PLACEMENT_ATTEMPTS):
            cx = rng.uniform(w / 2.0, dims.width - w / 2.0)
            cy = rng.uniform(h / 2.0, dims.height - h / 2.0)
            box = BoundingBox(cx, cy, w, h)
            if all(not _overlaps(box, other) for other in placed):
                placed.append(box)
                centers.append((cx, cy))
                break
        else:
            raise InfeasibleConfigError(
                f"could not place object {i} disjointly after {_PLACEMENT_ATTEMPTS} attempts")
    return centers


def _overlaps(a: BoundingBox, b: BoundingBox) -> bool:
    return (min(a.x_max, b.x_max) > max(a.x_min, b.x_min)
            and min(a.y_max, b.y_max) > max(a.y_min, b.y_min))


def _walk(center: tuple[float, float], config: ScenarioConfig,
          rng: np.random.Generator) -> list[BoundingBox]:
    """Bounded random walk: constant speed, occasional direction changes,
    reflection at frame borders so boxes never leave the frame."""
    dims = config.frame_dims
    w, h = config.object_width, config.object_height
    lo_x, hi_x = w / 2.0, dims.width - w / 2.0
    lo_y, hi_y = h / 2.0, dims.height - h / 2.0
    cx, cy = center
    angle = rng.uniform(0.0, 2.0 * np.pi)
    vx, vy = config.speed * np.cos(angle), config.speed * np.sin(angle)
    boxes = [BoundingBox(cx, cy, w, h)]
    for _ in range(config.num_frames - 1):
        if rng.uniform() < config.direction_change_prob:
            angle = rng.uniform(0.0, 2.0 * np.pi)
            vx, vy = config.speed * np.cos(angle), config.speed * np.sin(angle)
        cx, cy = cx + vx, cy + vy
        if cx < lo_x:
            cx, vx = 2 * lo_x - cx, -vx
        elif cx > hi_x:
            cx, vx = 2 * hi_x - cx, -vx
        if cy < lo_y:
            cy, vy = 2 * lo_y - cy, -vy
        elif cy > hi_y:
            cy, vy = 2 * hi_y - cy, -vy
        cx = min(max(cx, lo_x), hi_x)
        cy = min(max(cy, lo_y), hi_y)
        boxes.append(BoundingBox(cx, cy, w, h))
    return boxes


def _observed_latents(objects: list[SimObject], config: ScenarioConfig,
                      frame_index: int) -> list[np.ndarray]:
    """Per-object observed latent at a frame: identity plus noise, renormalized.

    Derived from a (seed, "noise", frame) sub-stream over all objects in id
    order, so frames can be rebuilt from a pinned scenario file alone.
    """
    if config.appearance_noise_sigma == 0.0:
        return [o.latent for o in objects]
    rng = substream(config.seed, "noise", frame_index)
    eps = rng.normal(0.0, config.appearance_noise_sigma,
                     size=(len(objects), config.latent_dim))
    return [_unit(o.latent + eps[i]) for i, o in enumerate(objects)]


def _build_frames(objects: list[SimObject], config: ScenarioConfig) -> list[Frame]:
    frames = []
    for k in range(config.num_frames):
        observed = _observed_latents(objects, config, k)
        obs = tuple(
            SimObservation(object_id=o.object_id, box=o.trajectory[k], latent=observed[i])
            for i, o in enumerate(objects) if o.visible[k])
        frames.append(Frame(index=k, dims=config.frame_dims, observations=obs))
    return frames


def generate(config: ScenarioConfig) -> Scenario:
    """Build a scenario deterministically from its configuration.

    Object 0 is the target; it is invisible exactly on the union of the
    occlusion windows. Confusers are always visible.
    """
    rng = substream(config.seed, "simulator")
    target_latent = _unit(rng.normal(size=config.latent_dim))
    latents = [target_latent]
    for _ in range(config.num_confusers):
        latents.append(_confuser_latent(target_latent, config.confuser_similarity, rng))
    centers = _initial_centers(config, rng)
    objects = []
    for i, (latent, center) in enumerate(zip(latents, centers)):
        trajectory = _walk(center, config, rng)
        if i == 0:
            visible = [not _occluded(config, k) for k in range(config.num_frames)]
        else:
            visible = [True] * config.num_frames
        objects.append(SimObject(object_id=i, latent=latent,
                                 trajectory=trajectory, visible=visible))
    return Scenario(config=config, objects=objects, frames=_build_frames(objects, config))


def ground_truth(scenario: Scenario, frame_index: int) -> list[tuple[int, BoundingBox, bool]]:
    """(id, box, visible) for every object at `frame_index`."""
    if not (0 <= frame_index < scenario.config.num_frames):
        raise IndexError(f"frame {frame_index} outside [0, {scenario.config.num_frames})")
    return [(o.object_id, o.trajectory[frame_index], o.visible[frame_index])
            for o in scenario.objects]


# ---------------------------------------------------------------------------
# JSON fixture pinning


def _config_to_dict(config: ScenarioConfig) -> dict:
    d = asdict(config)
    d["frame_dims"] = [config.frame_dims.width, config.frame_dims.height]
    d["occlusion_windows"] = [[int(s), int(e)] for s, e in config.occlusion_windows]
    return d


def _config_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    w, h = d.pop("frame_dims")
    windows = [(int(s), int(e)) for s, e in d.pop("occlusion_windows")]
    return ScenarioConfig(frame_dims=FrameDims(int(w), int(h)),
                          occlusion_windows=windows, **d)


def scenario_to_json(scenario: Scenario, provenance: dict | None = None) -> str:
    doc = {
        "config": _config_to_dict(scenario.config),
        "objects": [{
            "id": o.object_id,
            "latent": [float(v) for v in o.latent],
            "trajectory": [[b.cx, b.cy, b.w, b.h] for b in o.trajectory],
            "visible": o.visible,
        } for o in scenario.objects],
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return json.dumps(doc, indent=1, sort_keys=True)


def scenario_from_json(text: str) -> Scenario:
    """Rebuild a scenario from a pinned fixture.

    Latents/trajectories come from the document; per-frame observation
    noise is re-derived from the stored seed (it is a pure function of
    seed, frame and object id order), so the result matches generate().
    """
    doc = json.loads(text)
    config = _config_from_dict(doc["config"])
    objects = []
    for entry in sorted(doc["objects"], key=lambda e: e["id"]):
        objects.append(SimObject(
            object_id=int(entry["id"]),
            latent=np.array(entry["latent"], dtype=np.float64),
            trajectory=[BoundingBox(*map(float, b)) for b in entry["trajectory"]],
            visible=[bool(v) for v in entry["visible"]],
        ))
    return Scenario(config=config, objects=objects, frames=_build_frames(objects, config))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_json(Path(path).read_text(encoding="utf-8"))


def save_scenario(path: str | Path, scenario: Scenario,
                  provenance: dict | None = None) -> None:
    Path(path).write_text(scenario_to_json(scenario, provenance), encoding="utf-8")
