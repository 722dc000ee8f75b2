"""Candidate generation and desk-scale embedding front-ends.

Three providers sit behind the same contract: a simulator oracle (test
double for an RPN head), an interchange-file reader for candidates
produced by an external detector, and a self-contained normalized
cross-correlation baseline for raster sequences. Rasterization of boxes
to integer pixel windows happens only here.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter, zoom
from scipy.signal import fftconvolve

from .association import Candidate
from .embedding import AppearanceObservation, FeatureVector, as_feature
from .errors import (
    DecodeError,
    MalformedRecordError,
    MissingFeatureError,
    NoOverlapError,
    PatchTooSmallError,
    RegionSmallerThanTemplateError,
    WrongPayloadError,
)
from .geometry import (
    Anchor,
    BoundingBox,
    FrameDims,
    RegressionDelta,
    SearchRegion,
    boxes_intersect,
    clip_to_frame,
    decode_anchor,
    iou,
)
from .rng import substream

DEFAULT_BASE_SCORE = 0.95
NCC_SCALES = (0.95, 1.0, 1.05)
DEFAULT_NCC_FLOOR = 0.2
DEFAULT_NCC_MAX_PEAKS = 8
NCC_NMS_IOU = 0.5
HISTOGRAM_BINS = 16
HISTOGRAM_GRID = 2
HISTOGRAM_DIM = 3 * HISTOGRAM_BINS * HISTOGRAM_GRID * HISTOGRAM_GRID

# window variance below this (per pixel, squared intensity units) counts as flat
_VAR_EPS = 1e-6


@dataclass(frozen=True)
class SimObservation:
    """One visible simulated object as seen at a frame: box plus observed latent."""

    object_id: int
    box: BoundingBox
    latent: np.ndarray


@dataclass(frozen=True)
class Frame:
    """A single input frame: 8-bit RGB raster or simulator observation list."""

    index: int
    dims: FrameDims
    raster: np.ndarray | None = None
    observations: tuple[SimObservation, ...] | None = None

    def __post_init__(self):
        if (self.raster is None) == (self.observations is None):
            raise ValueError("frame must carry exactly one of raster/observations")
        if self.raster is not None and (self.raster.ndim != 3 or self.raster.shape[2] != 3):
            raise ValueError(f"raster must be HxWx3, got shape {self.raster.shape}")


class CandidateProvider(ABC):
    """Produces scored candidate boxes (features absent) for a search region."""

    def start(self, frame: Frame, initial_box: BoundingBox) -> None:
        """Hook run once at tracker init (e.g. template capture)."""

    @abstractmethod
    def propose(self, frame: Frame, region: SearchRegion) -> list[Candidate]: ...

    def initial_feature(self, frame: Frame, box: BoundingBox) -> FeatureVector | None:
        """Pre-computed feature for the init box, when the provider has one."""
        return None


# ---------------------------------------------------------------------------
# patch rasterization


def _int_window(box: BoundingBox, dims: FrameDims,
                min_size: int = 1) -> tuple[int, int, int, int]:
    """Integer pixel window (x0, y0, x1, y1) covering `box`, clamped to frame.

    The window is grown (within the frame) to at least min_size per axis.
    """
    x0 = max(0, int(math.floor(box.x_min)))
    y0 = max(0, int(math.floor(box.y_min)))
    x1 = min(dims.width, int(math.ceil(box.x_max)))
    y1 = min(dims.height, int(math.ceil(box.y_max)))

    def grow(lo: int, hi: int, limit: int) -> tuple[int, int]:
        while hi - lo < min_size:
            if hi < limit:
                hi += 1
            elif lo > 0:
                lo -= 1
            else:
                raise PatchTooSmallError(
                    f"frame {dims.width}x{dims.height} cannot hold a {min_size}px window")
        return lo, hi

    x0, x1 = grow(x0, x1, dims.width)
    y0, y1 = grow(y0, y1, dims.height)
    return x0, y0, x1, y1


def crop_patch(raster: np.ndarray, box: BoundingBox, dims: FrameDims,
               min_size: int = 1) -> np.ndarray:
    x0, y0, x1, y1 = _int_window(box, dims, min_size)
    return raster[y0:y1, x0:x1]


def observation_for_box(frame: Frame, box: BoundingBox) -> AppearanceObservation:
    """Appearance observation for a box, i.e. the online-crop step.

    Raster frames yield the pixel patch under the box. Simulator frames
    yield the latent of the visible object the box overlaps most (falling
    back to the nearest center when nothing overlaps), which models what
    a crop at that box would actually show.
    """
    if frame.raster is not None:
        return AppearanceObservation(patch=crop_patch(frame.raster, box, frame.dims, min_size=4))
    if not frame.observations:
        raise LookupError(f"frame {frame.index} has no visible objects to observe")
    best = max(frame.observations, key=lambda o: iou(o.box, box))
    if iou(best.box, box) <= 0.0:
        best = min(frame.observations,
                   key=lambda o: math.hypot(o.box.cx - box.cx, o.box.cy - box.cy))
    return AppearanceObservation(latent=best.latent)


# ---------------------------------------------------------------------------
# simulator oracle provider


class OracleProvider(CandidateProvider):
    """Test double for a detection head, driven by simulator observations.

    Emits one candidate per visible object intersecting the region. Boxes
    get additive Gaussian jitter drawn from a per-frame sub-stream, so a
    repeated call on the same frame returns identical output. Occluded
    objects never appear (they carry no observation).
    """

    def __init__(self, seed: int, base_score: float = DEFAULT_BASE_SCORE,
                 jitter_sigma: float = 0.0):
        if not (0.0 <= base_score <= 1.0):
            raise ValueError("base_score must lie in [0, 1]")
        if jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        self.seed = seed
        self.base_score = base_score
        self.jitter_sigma = jitter_sigma

    def propose(self, frame: Frame, region: SearchRegion) -> list[Candidate]:
        if frame.observations is None:
            raise WrongPayloadError("oracle provider needs simulator observations")
        obs = frame.observations
        if self.jitter_sigma > 0.0 and obs:
            rng = substream(self.seed, "jitter", frame.index)
            noise = rng.normal(0.0, self.jitter_sigma, size=(len(obs), 4))
        else:
            noise = np.zeros((len(obs), 4))
        out: list[Candidate] = []
        for o, eps in zip(obs, noise):
            if not boxes_intersect(o.box, region.box):
                continue
            jittered = BoundingBox(o.box.cx + eps[0], o.box.cy + eps[1],
                                   max(o.box.w + eps[2], 1.0),
                                   max(o.box.h + eps[3], 1.0))
            try:
                jittered = clip_to_frame(jittered, frame.dims)
            except NoOverlapError:
                continue
            if not boxes_intersect(jittered, region.box):
                continue
            out.append(Candidate(box=jittered, score=self.base_score))
        return out


# ---------------------------------------------------------------------------
# external interchange file


@dataclass(frozen=True)
class ExternalCandidateRecord:
    """One candidate from the interchange file, already in image space."""

    frame_index: int
    x_min: float
    y_min: float
    w: float
    h: float
    score: float
    feature: np.ndarray | None = None

    @property
    def box(self) -> BoundingBox:
        return BoundingBox.from_corner(self.x_min, self.y_min, self.w, self.h)


def _parse_record(obj: dict, line_number: int) -> ExternalCandidateRecord:
    def fail(msg: str):
        raise MalformedRecordError(line_number, msg)

    if not isinstance(obj, dict):
        fail("record must be a JSON object")
    frame = obj.get("frame")
    if not isinstance(frame, int) or frame < 0:
        fail(f"'frame' must be a non-negative integer, got {frame!r}")
    score = obj.get("score")
    if not isinstance(score, (int, float)) or not (0.0 <= float(score) <= 1.0):
        fail(f"'score' must be a number in [0, 1], got {score!r}")

    if "box" in obj:
        box = obj["box"]
        if not (isinstance(box, list) and len(box) == 4
                and all(isinstance(v, (int, float)) for v in box)):
            fail(f"'box' must be 4 numbers [x_min, y_min, w, h], got {box!r}")
        x, y, w, h = (float(v) for v in box)
        if w <= 0 or h <= 0:
            fail(f"box size must be positive, got w={w}, h={h}")
    elif "anchor" in obj:
        anchor = obj.get("anchor")
        delta = obj.get("delta")
        for name, arr in (("anchor", anchor), ("delta", delta)):
            if not (isinstance(arr, list) and len(arr) == 4
                    and all(isinstance(v, (int, float)) for v in arr)):
                fail(f"'{name}' must be 4 numbers, got {arr!r}")
        try:
            decoded = decode_anchor(Anchor(*(float(v) for v in anchor)),
                                    RegressionDelta(*(float(v) for v in delta)))
        except (ValueError, DecodeError) as e:
            fail(str(e))
        x, y, w, h = decoded.to_corner()
    else:
        fail("record needs either 'box' or 'anchor'+'delta'")

    feature = None
    if "feature" in obj and obj["feature"] is not None:
        raw = obj["feature"]
        if not (isinstance(raw, list) and raw
                and all(isinstance(v, (int, float)) for v in raw)):
            fail(f"'feature' must be a non-empty number array")
        try:
            feature = as_feature(raw)
        except ValueError as e:
            fail(str(e))
    return ExternalCandidateRecord(frame, x, y, w, h, float(score), feature)


def load_interchange(path: str | Path) -> dict[int, list[ExternalCandidateRecord]]:
    """Parse a JSON Lines candidate file, indexed by frame.

    Raises MalformedRecordError (with the line number) on the first bad
    line, including frame indices that go backwards.
    """
    by_frame: dict[int, list[ExternalCandidateRecord]] = {}
    last_frame = -1
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecordError(line_number, f"invalid JSON: {e}") from None
            record = _parse_record(obj, line_number)
            if record.frame_index < last_frame:
                raise MalformedRecordError(
                    line_number,
                    f"frame {record.frame_index} out of order (after {last_frame})")
            last_frame = record.frame_index
            by_frame.setdefault(record.frame_index, []).append(record)
    return by_frame


def write_interchange(path: str | Path, records: list[ExternalCandidateRecord]) -> None:
    """Write candidate records as JSON Lines (UTF-8, LF), sorted by frame."""
    ordered = sorted(records, key=lambda r: r.frame_index)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in ordered:
            obj: dict = {"frame": r.frame_index,
                         "box": [r.x_min, r.y_min, r.w, r.h],
                         "score": r.score}
            if r.feature is not None:
                obj["feature"] = [float(v) for v in r.feature]
            fh.write(json.dumps(obj) + "\n")


class ExternalFileProvider(CandidateProvider):
    """Replays candidates (and optional features) from an interchange file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._by_frame = load_interchange(self.path)

    def propose(self, frame: Frame, region: SearchRegion) -> list[Candidate]:
        out = []
        for record in self._by_frame.get(frame.index, []):
            if not boxes_intersect(record.box, region.box):
                continue
            feature = record.feature.copy() if record.feature is not None else None
            out.append(Candidate(box=record.box, score=record.score, feature=feature))
        return out

    def initial_feature(self, frame: Frame, box: BoundingBox) -> FeatureVector | None:
        best, best_iou = None, 0.0
        for record in self._by_frame.get(frame.index, []):
            if record.feature is None:
                continue
            overlap = iou(record.box, box)
            if overlap > best_iou:
                best, best_iou = record.feature, overlap
        return best.copy() if best is not None else None


def default_anchor_grid(center: tuple[float, float], stride: int = 8,
                        grid_size: int = 25,
                        ratios: tuple[float, ...] = (1 / 3, 1 / 2, 1.0, 2.0, 3.0),
                        base_size: float = 64.0) -> list[Anchor]:
    """Anchor grid in image space around `center`, row-major then by ratio.

    Matches the usual region-proposal layout: grid_size x grid_size cell
    centers at `stride` spacing, one base scale, len(ratios) shapes per
    cell (w = base/sqrt(r), h = base*sqrt(r), preserving area).
    """
    cx, cy = center
    half = (grid_size - 1) / 2.0
    anchors = []
    for row in range(grid_size):
        for col in range(grid_size):
            acx = cx + (col - half) * stride
            acy = cy + (row - half) * stride
            for r in ratios:
                anchors.append(Anchor(acx, acy, base_size / math.sqrt(r),
                                      base_size * math.sqrt(r)))
    return anchors


# ---------------------------------------------------------------------------
# normalized cross-correlation baseline


def to_grayscale(raster: np.ndarray) -> np.ndarray:
    """(r + g + b) / 3 as float64."""
    rgb = raster.astype(np.float64)
    return (rgb[:, :, 0] + rgb[:, :, 1] + rgb[:, :, 2]) / 3.0


def _window_sums(a: np.ndarray, th: int, tw: int) -> np.ndarray:
    ii = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    ii[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    return ii[th:, tw:] - ii[:-th, tw:] - ii[th:, :-tw] + ii[:-th, :-tw]


def ncc_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation of `template` at every valid position.

    Both inputs are 2-D grayscale. Positions whose window (or the whole
    template) has near-zero variance come back NaN: NCC is undefined
    there and such windows are skipped by the peak picker.
    """
    th, tw = template.shape
    if image.shape[0] < th or image.shape[1] < tw:
        raise RegionSmallerThanTemplateError(
            f"image {image.shape} smaller than template {template.shape}")
    n = th * tw
    t0 = template - template.mean()
    t_energy = float((t0 * t0).sum())
    out_shape = (image.shape[0] - th + 1, image.shape[1] - tw + 1)
    if t_energy <= n * _VAR_EPS:
        return np.full(out_shape, np.nan)
    # sum over window of (w)(t - tbar) == sum (w - wbar)(t - tbar) since sum t0 = 0
    cross = fftconvolve(image, t0[::-1, ::-1], mode="valid")
    win_sum = _window_sums(image, th, tw)
    win_sq = _window_sums(image * image, th, tw)
    win_var = win_sq - win_sum * win_sum / n
    result = np.full(out_shape, np.nan)
    ok = win_var > n * _VAR_EPS
    result[ok] = cross[ok] / np.sqrt(win_var[ok] * t_energy)
    return result


class NccProvider(CandidateProvider):
    """Template-matching front-end over grayscale rasters.

    The template is captured once at init. Proposals are NCC local maxima
    over the region at template scales 0.95/1.0/1.05, scored (ncc + 1)/2,
    culled by IoU-0.5 non-maximum suppression, at most `max_peaks` kept.
    """

    def __init__(self, floor: float = DEFAULT_NCC_FLOOR,
                 max_peaks: int = DEFAULT_NCC_MAX_PEAKS):
        self.floor = floor
        self.max_peaks = max_peaks
        self._template: np.ndarray | None = None

    def start(self, frame: Frame, initial_box: BoundingBox) -> None:
        if frame.raster is None:
            raise WrongPayloadError("ncc provider needs raster frames")
        self._template = to_grayscale(
            crop_patch(frame.raster, initial_box, frame.dims, min_size=2))

    def propose(self, frame: Frame, region: SearchRegion) -> list[Candidate]:
        if frame.raster is None:
            raise WrongPayloadError("ncc provider needs raster frames")
        if self._template is None:
            raise RuntimeError("ncc provider used before start()")
        x0, y0, x1, y1 = _int_window(region.box, frame.dims)
        crop = to_grayscale(frame.raster[y0:y1, x0:x1])
        if crop.shape[0] < self._template.shape[0] or crop.shape[1] < self._template.shape[1]:
            raise RegionSmallerThanTemplateError(
                f"region crop {crop.shape} smaller than template {self._template.shape}")

        raw: list[tuple[float, BoundingBox, tuple]] = []
        for si, scale in enumerate(NCC_SCALES):
            if scale == 1.0:
                tmpl = self._template
            else:
                tmpl = zoom(self._template, scale, order=1)
            th, tw = tmpl.shape
            if th < 2 or tw < 2 or th > crop.shape[0] or tw > crop.shape[1]:
                continue
            scores = ncc_map(crop, tmpl)
            clean = np.where(np.isfinite(scores), scores, -np.inf)
            local_max = clean == maximum_filter(clean, size=3, mode="nearest")
            for py, px in np.argwhere(local_max & (clean >= self.floor)):
                box = BoundingBox.from_corner(float(x0 + px), float(y0 + py),
                                              float(tw), float(th))
                raw.append((float(clean[py, px]), box, (int(py), int(px), si)))

        raw.sort(key=lambda item: (-item[0], item[2]))
        kept: list[Candidate] = []
        for ncc, box, _ in raw:
            if len(kept) >= self.max_peaks:
                break
            if any(iou(box, k.box) > NCC_NMS_IOU for k in kept):
                continue
            kept.append(Candidate(box=box, score=(ncc + 1.0) / 2.0))
        return kept


# ---------------------------------------------------------------------------
# histogram embedder


def histogram_embed(patch: np.ndarray) -> FeatureVector:
    """Color-layout feature: per-channel 16-bin histograms on a 2x2 grid.

    Blocks are ordered row-major (TL, TR, BL, BR); within a block the 48
    values (3 channels x 16 bins) are L1-normalized. D = 192.
    """
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise ValueError(f"patch must be HxWx3, got shape {patch.shape}")
    h, w = patch.shape[:2]
    if h < 4 or w < 4:
        raise PatchTooSmallError(f"patch must be at least 4x4, got {h}x{w}")
    vals = np.clip(patch.astype(np.float64), 0.0, 255.0)
    rows = (0, h // 2, h)
    cols = (0, w // 2, w)
    feature = np.empty(HISTOGRAM_DIM)
    i = 0
    for br in range(HISTOGRAM_GRID):
        for bc in range(HISTOGRAM_GRID):
            block = vals[rows[br]:rows[br + 1], cols[bc]:cols[bc + 1]]
            hists = [np.histogram(block[:, :, c], bins=HISTOGRAM_BINS,
                                  range=(0.0, 256.0))[0] for c in range(3)]
            chunk = np.concatenate(hists).astype(np.float64)
            feature[i:i + 3 * HISTOGRAM_BINS] = chunk / chunk.sum()
            i += 3 * HISTOGRAM_BINS
    return feature


class HistogramEmbedder:
    """Embeds raster patches with histogram_embed (D = 192)."""

    def embed(self, observation: AppearanceObservation) -> FeatureVector:
        if observation.patch is None:
            raise ValueError("histogram embedder requires a patch observation")
        return histogram_embed(observation.patch)


class ExternalFeaturesEmbedder:
    """Placeholder for runs whose features all arrive in the candidate file.

    It is never supposed to be invoked; reaching it means some candidate
    (or the init box) had no pre-computed feature.
    """

    def embed(self, observation: AppearanceObservation) -> FeatureVector:
        raise MissingFeatureError(
            "external embedder has no network; features must be present in the candidate file")
