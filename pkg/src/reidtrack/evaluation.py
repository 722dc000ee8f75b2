"""One-pass evaluation metrics: success/precision curves and AR summary.

Conventions: the initialization frame is excluded everywhere, frames
without ground truth never enter a denominator, a missing prediction
counts as overlap 0 / infinite center error, and the success test uses
strict iou > threshold. The accuracy/robustness pair is overlap-based
(no re-initialization protocol) and is not comparable to reset-based
robustness numbers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, NoAnnotatedFramesError
from .geometry import BoundingBox, center_distance, iou

SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)
PRECISION_THRESHOLDS = np.arange(0.0, 51.0)
PRECISION_REFERENCE_PX = 20


@dataclass(frozen=True)
class SequenceResult:
    """Aligned per-frame predictions and annotations for one sequence."""

    name: str
    predictions: Sequence[BoundingBox | None]
    ground_truth: Sequence[BoundingBox | None]

    def __post_init__(self):
        if len(self.predictions) != len(self.ground_truth) or len(self.predictions) < 1:
            raise ValueError(
                f"predictions ({len(self.predictions)}) and ground truth "
                f"({len(self.ground_truth)}) must have equal length >= 1")


@dataclass(frozen=True)
class SuccessCurve:
    thresholds: np.ndarray
    values: np.ndarray
    auc: float


@dataclass(frozen=True)
class PrecisionCurve:
    thresholds: np.ndarray
    values: np.ndarray
    precision_at_20: float


@dataclass(frozen=True)
class ARScore:
    accuracy: float
    robustness: float


def _annotated(result: SequenceResult) -> list[tuple[BoundingBox | None, BoundingBox]]:
    """(prediction, gt) pairs on annotated frames, initialization frame excluded."""
    pairs = [(p, g) for p, g in zip(result.predictions[1:], result.ground_truth[1:])
             if g is not None]
    if not pairs:
        raise NoAnnotatedFramesError(f"sequence '{result.name}' has no annotated frames")
    return pairs


def success_curve(result: SequenceResult) -> SuccessCurve:
    """Fraction of annotated frames with iou strictly above each threshold."""
    pairs = _annotated(result)
    overlaps = np.array([iou(p, g) if p is not None else 0.0 for p, g in pairs])
    values = np.array([(overlaps > t).mean() for t in SUCCESS_THRESHOLDS])
    return SuccessCurve(SUCCESS_THRESHOLDS.copy(), values, float(values.mean()))


def precision_curve(result: SequenceResult) -> PrecisionCurve:
    """Fraction of annotated frames with center error within each threshold."""
    pairs = _annotated(result)
    errors = np.array([center_distance(p, g) if p is not None else np.inf
                       for p, g in pairs])
    values = np.array([(errors <= t).mean() for t in PRECISION_THRESHOLDS])
    return PrecisionCurve(PRECISION_THRESHOLDS.copy(), values,
                          float(values[PRECISION_REFERENCE_PX]))


def accuracy_robustness(result: SequenceResult) -> ARScore:
    """Overlap-based accuracy/robustness summary.

    accuracy: mean iou over annotated frames where a box was reported and
    overlapped (0 when there are none); robustness: fraction of annotated
    frames with a reported, overlapping box.
    """
    pairs = _annotated(result)
    overlaps = [iou(p, g) for p, g in pairs if p is not None]
    hits = [o for o in overlaps if o > 0.0]
    accuracy = float(np.mean(hits)) if hits else 0.0
    return ARScore(accuracy=accuracy, robustness=len(hits) / len(pairs))


def aggregate(results: Sequence[SequenceResult]) -> tuple[SuccessCurve, PrecisionCurve, ARScore]:
    """Unweighted per-threshold mean across sequences; AR averaged per sequence."""
    if not results:
        raise EmptyInputError("aggregate needs at least one sequence")
    succ = [success_curve(r) for r in results]
    prec = [precision_curve(r) for r in results]
    ars = [accuracy_robustness(r) for r in results]
    succ_values = np.mean([c.values for c in succ], axis=0)
    prec_values = np.mean([c.values for c in prec], axis=0)
    return (
        SuccessCurve(SUCCESS_THRESHOLDS.copy(), succ_values, float(succ_values.mean())),
        PrecisionCurve(PRECISION_THRESHOLDS.copy(), prec_values,
                       float(prec_values[PRECISION_REFERENCE_PX])),
        ARScore(accuracy=float(np.mean([a.accuracy for a in ars])),
                robustness=float(np.mean([a.robustness for a in ars]))),
    )


# ---------------------------------------------------------------------------
# file formats


def parse_box_line(line: str) -> BoundingBox | None:
    """Parse one `x_min,y_min,w,h` line; blank or NaN tokens mean absent."""
    stripped = line.strip()
    if not stripped:
        return None
    parts = [p.strip() for p in stripped.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated values, got {len(parts)}: {line!r}")
    if any(p.lower() == "nan" for p in parts):
        return None
    x, y, w, h = (float(p) for p in parts)
    return BoundingBox.from_corner(x, y, w, h)


def read_box_file(path: str | Path) -> list[BoundingBox | None]:
    """Read a per-frame box file (results or ground truth), skipping comments."""
    out: list[BoundingBox | None] = []
    with open(path, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if line.startswith("#"):
                continue
            try:
                out.append(parse_box_line(line))
            except ValueError as e:
                raise ValueError(f"{path}:{number}: {e}") from None
    return out


def write_curve_csv(path: str | Path, curve: SuccessCurve | PrecisionCurve,
                    header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for h in header_lines:
            fh.write(f"# {h}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "value"])
        for t, v in zip(curve.thresholds, curve.values):
            writer.writerow([repr(float(t)), repr(float(v))])


def write_summary_csv(path: str | Path,
                      rows: Sequence[tuple[str, SuccessCurve, PrecisionCurve, ARScore]],
                      overall: tuple[SuccessCurve, PrecisionCurve, ARScore],
                      header_lines: Sequence[str] = ()) -> None:
    """Per-sequence metric summary plus an ALL aggregate row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for h in header_lines:
            fh.write(f"# {h}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "auc", "precision20", "accuracy", "robustness"])
        for name, succ, prec, ar in rows:
            writer.writerow([name, repr(succ.auc), repr(prec.precision_at_20),
                             repr(ar.accuracy), repr(ar.robustness)])
        succ, prec, ar = overall
        writer.writerow(["ALL", repr(succ.auc), repr(prec.precision_at_20),
                         repr(ar.accuracy), repr(ar.robustness)])
