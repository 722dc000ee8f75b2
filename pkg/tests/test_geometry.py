import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reidtrack.errors import DecodeError, NoOverlapError
from reidtrack.geometry import (
    Anchor,
    BoundingBox,
    FrameDims,
    RegressionDelta,
    center_distance,
    clip_to_frame,
    contains,
    decode_anchor,
    expand_region,
    full_frame_scale,
    iou,
    nominal_search_side,
)

coords = st.floats(-1000, 1000, allow_nan=False, allow_infinity=False)
sizes = st.floats(0.1, 500, allow_nan=False, allow_infinity=False)
boxes = st.builds(BoundingBox, cx=coords, cy=coords, w=sizes, h=sizes)


def corner(x, y, w, h):
    return BoundingBox.from_corner(x, y, w, h)


class TestBoundingBox:
    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 5, -1)

    def test_corner_roundtrip(self):
        box = corner(3.0, 4.0, 10.0, 6.0)
        assert box.to_corner() == (3.0, 4.0, 10.0, 6.0)
        assert box.center == (8.0, 7.0)

    @given(boxes)
    def test_corner_form_is_lossless(self, box):
        back = BoundingBox.from_corner(*box.to_corner())
        assert math.isclose(back.cx, box.cx, abs_tol=1e-9)
        assert math.isclose(back.cy, box.cy, abs_tol=1e-9)


class TestIou:
    def test_identity_is_one(self):
        box = corner(2, 3, 7, 5)
        assert abs(iou(box, box) - 1.0) <= 1e-12

    def test_disjoint_is_zero(self):
        assert iou(corner(0, 0, 2, 2), corner(10, 10, 2, 2)) == 0.0

    def test_hand_computed_third(self):
        # inter = 1*2 = 2, union = 4 + 4 - 2 = 6
        assert iou(corner(0, 0, 2, 2), corner(1, 0, 2, 2)) == pytest.approx(1 / 3, abs=1e-12)

    @given(boxes, boxes)
    @settings(max_examples=200)
    def test_symmetric_and_bounded(self, a, b):
        ab = iou(a, b)
        assert abs(ab - iou(b, a)) <= 1e-12
        assert 0.0 <= ab <= 1.0


class TestCenterDistance:
    def test_identical_centers(self):
        assert center_distance(corner(0, 0, 4, 4), BoundingBox(2, 2, 9, 1)) == 0.0

    def test_three_four_five(self):
        assert center_distance(BoundingBox(0, 0, 1, 1), BoundingBox(3, 4, 2, 2)) == 5.0

    def test_translation_invariance(self):
        a, b = BoundingBox(1, 2, 3, 4), BoundingBox(5, 6, 7, 8)
        d = center_distance(a, b)
        a2 = BoundingBox(a.cx + 17.5, a.cy - 3.25, a.w, a.h)
        b2 = BoundingBox(b.cx + 17.5, b.cy - 3.25, b.w, b.h)
        assert center_distance(a2, b2) == pytest.approx(d, abs=1e-9)

    @given(boxes, boxes, boxes)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        assert center_distance(a, c) <= center_distance(a, b) + center_distance(b, c) + 1e-9


class TestDecodeAnchor:
    def test_zero_delta_is_identity(self):
        anchor = Anchor(10.0, 20.0, 8.0, 12.0)
        box = decode_anchor(anchor, RegressionDelta(0, 0, 0, 0))
        for got, want in zip((box.cx, box.cy, box.w, box.h), (10, 20, 8, 12)):
            assert abs(got - want) <= 1e-12

    def test_log_width_doubles(self):
        box = decode_anchor(Anchor(0, 0, 5, 5), RegressionDelta(0, 0, math.log(2), 0))
        assert box.w == pytest.approx(10.0, abs=1e-12)
        assert box.h == pytest.approx(5.0, abs=1e-12)

    def test_center_shift_scales_with_anchor_size(self):
        box = decode_anchor(Anchor(10, 10, 4, 4), RegressionDelta(0.5, 0, 0, 0))
        assert (box.cx, box.cy) == (12.0, 10.0)

    def test_overflow_rejected(self):
        with pytest.raises(DecodeError):
            decode_anchor(Anchor(0, 0, 1, 1), RegressionDelta(0, 0, 1e4, 0))

    def test_delta_must_be_finite(self):
        with pytest.raises(ValueError):
            RegressionDelta(float("nan"), 0, 0, 0)


class TestClipToFrame:
    frame = FrameDims(100, 80)

    def test_interior_unchanged(self):
        box = corner(10, 10, 20, 20)
        assert clip_to_frame(box, self.frame) == box

    def test_left_protrusion_clamped(self):
        clipped = clip_to_frame(corner(-5, 10, 20, 20), self.frame)
        assert clipped.to_corner() == (0.0, 10.0, 15.0, 20.0)

    def test_fully_outside_raises(self):
        with pytest.raises(NoOverlapError):
            clip_to_frame(corner(200, 200, 10, 10), self.frame)

    def test_touching_edge_counts_as_outside(self):
        with pytest.raises(NoOverlapError):
            clip_to_frame(corner(100, 10, 10, 10), self.frame)


class TestExpandRegion:
    def test_nominal_square(self):
        # w = h = 20: context pad p = 20, side = 2*sqrt(40*40) = 80
        box = BoundingBox(100, 100, 20, 20)
        region = expand_region(box, 1.0, FrameDims(1000, 1000))
        assert region.box.w == pytest.approx(80.0)
        assert region.box.h == pytest.approx(80.0)
        assert region.box.center == (100.0, 100.0)

    def test_scale_two_pre_clip(self):
        region = expand_region(BoundingBox(100, 100, 20, 20), 2.0, FrameDims(1000, 1000))
        assert region.box.to_corner() == pytest.approx((20.0, 20.0, 160.0, 160.0))

    def test_saturates_at_full_frame(self):
        frame = FrameDims(200, 150)
        region = expand_region(BoundingBox(100, 100, 20, 20), 1e6, frame)
        assert region.box.to_corner() == (0.0, 0.0, 200.0, 150.0)

    def test_full_frame_scale_covers_frame(self):
        frame = FrameDims(200, 150)
        box = BoundingBox(30, 100, 20, 10)
        region = expand_region(box, full_frame_scale(box, frame), frame)
        assert region.box.to_corner() == pytest.approx((0.0, 0.0, 200.0, 150.0))

    @given(st.floats(1, 50), st.floats(1, 50),
           st.floats(10, 190), st.floats(10, 190), st.floats(2, 80), st.floats(2, 80))
    @settings(max_examples=200)
    def test_monotone_in_scale(self, s1, s2, cx, cy, w, h):
        lo, hi = sorted((s1, s2))
        frame = FrameDims(200, 200)
        box = BoundingBox(cx, cy, w, h)
        small = expand_region(box, lo, frame)
        big = expand_region(box, hi, frame)
        assert contains(big.box, small.box)

    def test_rejects_scale_below_one(self):
        with pytest.raises(ValueError):
            expand_region(BoundingBox(50, 50, 10, 10), 0.5, FrameDims(100, 100))


def test_nominal_search_side_formula():
    # p = (3+5)/2 = 4 -> side = 2*sqrt(7*9)
    assert nominal_search_side(3, 5) == pytest.approx(2 * math.sqrt(63))
