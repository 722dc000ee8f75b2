"""Boxes, anchors, overlap and distance primitives.

Boxes are kept in center+size form because both the positional distance
and the search-region math are center-based; corner form (x_min, y_min,
w, h) is a view. All geometry lives in continuous pixel coordinates;
rasterization only happens inside providers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DecodeError, NoOverlapError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: center (cx, cy) and positive size (w, h) in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        # normalize numpy scalars so repr/serialization stay plain floats
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_corner(cls, x_min: float, y_min: float, w: float, h: float) -> "BoundingBox":
        return cls(x_min + w / 2.0, y_min + h / 2.0, w, h)

    @property
    def x_min(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y_min(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x_max(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y_max(self) -> float:
        return self.cy + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def to_corner(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.w, self.h)


@dataclass(frozen=True)
class FrameDims:
    """Integer frame extent in pixels."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"frame dims must be >= 1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Anchor:
    """Prior box at a grid cell: center and base size in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"anchor size must be positive, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class RegressionDelta:
    """Dimensionless box-regression offsets: (dx, dy) shifts, (dw, dh) log scales."""

    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self):
        vals = (self.dx, self.dy, self.dw, self.dh)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"regression delta must be finite, got {vals}")


@dataclass(frozen=True)
class SearchRegion:
    """Clipped search area plus the expansion factor it was built with."""

    box: BoundingBox
    scale_factor: float

    def __post_init__(self):
        if self.scale_factor < 1.0:
            raise ValueError(f"scale_factor must be >= 1, got {self.scale_factor}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union in [0, 1]; 0 for disjoint or degenerate pairs."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    # corner<->center rounding can push the ratio 1 ulp past 1.0
    return min(inter / union, 1.0)


def boxes_intersect(a: BoundingBox, b: BoundingBox) -> bool:
    """True when the boxes share positive area."""
    return (min(a.x_max, b.x_max) > max(a.x_min, b.x_min)
            and min(a.y_max, b.y_max) > max(a.y_min, b.y_min))


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centers in pixels."""
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def decode_anchor(anchor: Anchor, delta: RegressionDelta) -> BoundingBox:
    """Map a regression delta off an anchor into an image-space box.

    cx' = cx + dx*w, cy' = cy + dy*h, w' = w*exp(dw), h' = h*exp(dh).
    """
    cx = anchor.cx + delta.dx * anchor.w
    cy = anchor.cy + delta.dy * anchor.h
    try:
        w = anchor.w * math.exp(delta.dw)
        h = anchor.h * math.exp(delta.dh)
    except OverflowError:
        raise DecodeError(f"size factor overflows: dw={delta.dw}, dh={delta.dh}") from None
    if not all(math.isfinite(v) for v in (cx, cy, w, h)):
        raise DecodeError(f"decoded box is not finite: cx={cx}, cy={cy}, w={w}, h={h}")
    return BoundingBox(cx, cy, w, h)


def clip_to_frame(box: BoundingBox, frame: FrameDims) -> BoundingBox:
    """Clip a box to [0, width] x [0, height] in corner form.

    Raises NoOverlapError when the box has no positive-area overlap with
    the frame (a clipped box must keep w > 0 and h > 0).
    """
    x0 = max(box.x_min, 0.0)
    y0 = max(box.y_min, 0.0)
    x1 = min(box.x_max, float(frame.width))
    y1 = min(box.y_max, float(frame.height))
    if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
        raise NoOverlapError(
            f"box {box.to_corner()} lies outside frame {frame.width}x{frame.height}")
    return BoundingBox.from_corner(x0, y0, x1 - x0, y1 - y0)


def nominal_search_side(w: float, h: float) -> float:
    """Base search-patch side for a target of size (w, h).

    Square of side 2*sqrt((w+p)(h+p)) with p = (w+h)/2, the usual
    context-padded crop rule for template-matching trackers.
    """
    p = (w + h) / 2.0
    return 2.0 * math.sqrt((w + p) * (h + p))


def expand_region(last_box: BoundingBox, scale: float, frame: FrameDims) -> SearchRegion:
    """Search region centered on `last_box`, grown by `scale`, clipped to frame.

    Saturates at the full frame once the scaled square covers it.
    """
    if scale < 1.0:
        raise ValueError(f"scale must be >= 1, got {scale}")
    side = nominal_search_side(last_box.w, last_box.h) * scale
    raw = BoundingBox(last_box.cx, last_box.cy, side, side)
    return SearchRegion(box=clip_to_frame(raw, frame), scale_factor=scale)


def full_frame_scale(last_box: BoundingBox, frame: FrameDims) -> float:
    """Smallest expansion factor whose region covers the whole frame.

    Growing past this value changes nothing (the clipped region is already
    the full frame), so it caps search-area growth during lost episodes.
    """
    half = max(last_box.cx, frame.width - last_box.cx,
               last_box.cy, frame.height - last_box.cy)
    return max(1.0, 2.0 * half / nominal_search_side(last_box.w, last_box.h))


def contains(outer: BoundingBox, inner: BoundingBox, tol: float = 1e-9) -> bool:
    """True when `inner` lies inside `outer` up to `tol`."""
    return (inner.x_min >= outer.x_min - tol and inner.y_min >= outer.y_min - tol
            and inner.x_max <= outer.x_max + tol and inner.y_max <= outer.y_max + tol)
