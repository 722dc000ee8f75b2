"""Run configuration: a flat `key = value` file with dotted section prefixes.

The format is deliberately line-oriented and diff-friendly. Every key has
a typed default; unknown keys are rejected, and all numeric invariants
are checked at load time by constructing the typed config objects.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .association import AssociationConfig
from .errors import ConfigError
from .geometry import FrameDims
from .simulator import ScenarioConfig
from .tracker import TrackerConfig

PROVIDERS = ("oracle", "external", "ncc")
EMBEDDERS = ("identity", "histogram", "external")


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_windows(text: str) -> list[tuple[int, int]]:
    if not text:
        return []
    windows = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise ValueError(f"window must be 'start-end', got {part!r}")
        windows.append((int(lo), int(hi)))
    return windows


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(f"{s}-{e}" for s, e in value)
    return str(value)


@dataclass(frozen=True)
class _Field:
    parse: Callable[[str], object]
    default: object


def _opt(parse: Callable[[str], object]) -> Callable[[str], object]:
    return lambda text: parse(text) if text else None


SCHEMA: dict[str, _Field] = {
    "seed": _Field(int, 0),
    "tracker.provider": _Field(str, "oracle"),
    "tracker.embedder": _Field(str, "identity"),
    "tracker.score_threshold": _Field(float, 0.6),
    "tracker.growth_factor": _Field(float, 1.3),
    "tracker.max_scale": _Field(_opt(float), None),
    "tracker.hold_last_box": _Field(_parse_bool, False),
    "association.epsilon": _Field(float, 1e-6),
    "association.accept_threshold_tracking": _Field(float, 0.6),
    "association.accept_threshold_lost": _Field(float, 0.35),
    "association.use_positional_bias": _Field(_parse_bool, True),
    "association.use_appearance": _Field(_parse_bool, True),
    "dictionary.capacity": _Field(int, 32),
    "dictionary.frame_gap": _Field(int, 10),
    "dictionary.normalize_before_mean": _Field(_parse_bool, False),
    "embedder.noise_sigma": _Field(float, 0.0),
    "provider.base_score": _Field(float, 0.95),
    "provider.candidates_path": _Field(_opt(str), None),
    "provider.ncc_floor": _Field(float, 0.2),
    "provider.ncc_max_peaks": _Field(int, 8),
    "simulator.frame_width": _Field(int, 200),
    "simulator.frame_height": _Field(int, 200),
    "simulator.num_frames": _Field(int, 100),
    "simulator.num_confusers": _Field(int, 0),
    "simulator.confuser_similarity": _Field(float, 0.7),
    "simulator.occlusion_windows": _Field(_parse_windows, []),
    "simulator.appearance_noise_sigma": _Field(float, 0.0),
    "simulator.speed": _Field(float, 2.0),
    "simulator.direction_change_prob": _Field(float, 0.1),
    "simulator.box_jitter_sigma": _Field(float, 0.0),
    "simulator.object_width": _Field(float, 20.0),
    "simulator.object_height": _Field(float, 20.0),
    "simulator.latent_dim": _Field(int, 64),
    "io.sequence_dir": _Field(_opt(str), None),
    "io.gt_path": _Field(_opt(str), None),
}


def parse_value(key: str, text: str):
    """Parse one raw value for `key` per the schema (also used by sweeps)."""
    if key not in SCHEMA:
        raise ConfigError(f"unknown configuration key '{key}'")
    try:
        return SCHEMA[key].parse(text.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for '{key}': {e}") from None


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def with_overrides(self, overrides: dict) -> "RunConfig":
        for key in overrides:
            if key not in SCHEMA:
                raise ConfigError(f"unknown configuration key '{key}'")
        merged = dict(self.values)
        merged.update(overrides)
        return RunConfig(merged)

    def serialize(self) -> str:
        return "\n".join(f"{k} = {_render(self.values[k])}" for k in sorted(SCHEMA)) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()[:12]

    # typed views -----------------------------------------------------------

    def association_config(self) -> AssociationConfig:
        v = self.values
        return AssociationConfig(
            epsilon=v["association.epsilon"],
            accept_threshold_tracking=v["association.accept_threshold_tracking"],
            accept_threshold_lost=v["association.accept_threshold_lost"],
            use_positional_bias=v["association.use_positional_bias"],
            use_appearance=v["association.use_appearance"])

    def tracker_config(self) -> TrackerConfig:
        v = self.values
        return TrackerConfig(
            score_threshold=v["tracker.score_threshold"],
            association=self.association_config(),
            growth_factor=v["tracker.growth_factor"],
            max_scale=v["tracker.max_scale"],
            dictionary_capacity=v["dictionary.capacity"],
            dictionary_frame_gap=v["dictionary.frame_gap"],
            normalize_before_mean=v["dictionary.normalize_before_mean"],
            hold_last_box=v["tracker.hold_last_box"],
            provider=v["tracker.provider"],
            embedder=v["tracker.embedder"])

    def scenario_config(self) -> ScenarioConfig:
        v = self.values
        return ScenarioConfig(
            frame_dims=FrameDims(v["simulator.frame_width"], v["simulator.frame_height"]),
            num_frames=v["simulator.num_frames"],
            num_confusers=v["simulator.num_confusers"],
            confuser_similarity=v["simulator.confuser_similarity"],
            occlusion_windows=list(v["simulator.occlusion_windows"]),
            appearance_noise_sigma=v["simulator.appearance_noise_sigma"],
            speed=v["simulator.speed"],
            direction_change_prob=v["simulator.direction_change_prob"],
            box_jitter_sigma=v["simulator.box_jitter_sigma"],
            object_width=v["simulator.object_width"],
            object_height=v["simulator.object_height"],
            latent_dim=v["simulator.latent_dim"],
            seed=v["seed"])


def default_config() -> RunConfig:
    return RunConfig({k: f.default for k, f in SCHEMA.items()})


def parse_config(text: str) -> RunConfig:
    """Parse config text; `#` starts a comment line, unknown keys are rejected."""
    values = {k: f.default for k, f in SCHEMA.items()}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw!r}")
        key = key.strip()
        values[key] = parse_value(key, value)
    config = RunConfig(values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.values["tracker.provider"] not in PROVIDERS:
        raise ConfigError(f"tracker.provider must be one of {PROVIDERS}")
    if config.values["tracker.embedder"] not in EMBEDDERS:
        raise ConfigError(f"tracker.embedder must be one of {EMBEDDERS}")
    if config.values["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    if config.values["embedder.noise_sigma"] < 0:
        raise ConfigError("embedder.noise_sigma must be >= 0")
    if not (0.0 <= config.values["provider.base_score"] <= 1.0):
        raise ConfigError("provider.base_score must lie in [0, 1]")
    try:
        config.tracker_config()
        config.scenario_config()
    except ValueError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return default_config()
    return parse_config(Path(path).read_text(encoding="utf-8"))
