import math

import pytest
from hypothesis import given, strategies as st

from screenmatch.errors import MalformedBounds
from screenmatch.geometry import BoundingBox, iou


def boxes(min_size=0.0):
    """Strategy for valid boxes, optionally with positive extent."""
    coord = st.floats(0.0, 1.0, allow_nan=False)

    def build(x1, y1, dx, dy):
        x2 = min(x1 + max(dx, min_size), 1.0)
        y2 = min(y1 + max(dy, min_size), 1.0)
        return BoundingBox(min(x1, 1.0 - max(dx, min_size) if min_size else x1),
                           min(y1, 1.0 - max(dy, min_size) if min_size else y1),
                           x2, y2)

    if min_size:
        # anchor so the box always fits
        return st.builds(
            lambda x1, y1, dx, dy: BoundingBox(
                min(x1, 1.0 - dx), min(y1, 1.0 - dy),
                min(x1, 1.0 - dx) + dx, min(y1, 1.0 - dy) + dy),
            coord, coord,
            st.floats(min_size, 1.0, allow_nan=False),
            st.floats(min_size, 1.0, allow_nan=False))
    return st.builds(build, coord, coord, coord, coord)


class TestValidation:
    def test_inverted_x(self):
        with pytest.raises(MalformedBounds):
            BoundingBox(0.5, 0.5, 0.4, 0.6)

    def test_inverted_y(self):
        with pytest.raises(MalformedBounds):
            BoundingBox(0.1, 0.9, 0.2, 0.1)

    @pytest.mark.parametrize("coords", [
        (-0.1, 0.0, 0.5, 0.5),
        (0.0, 0.0, 1.1, 0.5),
        (0.0, -2.0, 0.5, 0.5),
        (0.0, 0.0, 0.5, 1.5),
    ])
    def test_out_of_unit_square(self, coords):
        with pytest.raises(MalformedBounds):
            BoundingBox(*coords)

    def test_nan_rejected(self):
        with pytest.raises(MalformedBounds):
            BoundingBox(float("nan"), 0.0, 0.5, 0.5)

    def test_degenerate_allowed(self):
        b = BoundingBox(0.3, 0.4, 0.3, 0.4)
        assert b.area == 0.0


def test_accessors():
    b = BoundingBox(0.1, 0.2, 0.5, 0.8)
    assert math.isclose(b.width, 0.4)
    assert math.isclose(b.height, 0.6)
    assert math.isclose(b.area, 0.24)
    assert b.center == pytest.approx((0.3, 0.5))
    assert b.as_list() == pytest.approx([0.1, 0.2, 0.5, 0.8])


def test_translate_preserves_size():
    b = BoundingBox(0.1, 0.2, 0.5, 0.8).translate(0.2, -0.1)
    assert (b.x1, b.y1, b.x2, b.y2) == pytest.approx((0.3, 0.1, 0.7, 0.7))
    assert math.isclose(b.width, 0.4) and math.isclose(b.height, 0.6)


def test_translate_out_of_bounds_rejected():
    with pytest.raises(MalformedBounds):
        BoundingBox(0.8, 0.8, 1.0, 1.0).translate(0.1, 0.0)


class TestIoU:
    def test_known_overlap(self):
        # intersection 0.1*0.1 = 0.01, union 0.04 + 0.04 - 0.01 = 0.07
        a = BoundingBox(0.0, 0.0, 0.2, 0.2)
        b = BoundingBox(0.1, 0.1, 0.3, 0.3)
        assert iou(a, b) == pytest.approx(1.0 / 7.0, abs=1e-12)

    def test_identical(self):
        a = BoundingBox(0.2, 0.2, 0.7, 0.9)
        assert iou(a, a) == 1.0

    def test_disjoint(self):
        assert iou(BoundingBox(0.0, 0.0, 0.2, 0.2),
                   BoundingBox(0.5, 0.5, 0.9, 0.9)) == 0.0

    def test_touching_edges(self):
        # shared edge has zero-area intersection
        assert iou(BoundingBox(0.0, 0.0, 0.5, 0.5),
                   BoundingBox(0.5, 0.0, 1.0, 0.5)) == 0.0

    def test_both_degenerate(self):
        a = BoundingBox(0.5, 0.5, 0.5, 0.5)
        assert iou(a, a) == 0.0

    def test_containment(self):
        outer = BoundingBox(0.0, 0.0, 1.0, 1.0)
        inner = BoundingBox(0.25, 0.25, 0.75, 0.75)
        assert iou(outer, inner) == pytest.approx(0.25)

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0 + 1e-12
        assert v == iou(b, a)

    @given(boxes(min_size=0.05))
    def test_self_iou_is_one(self, b):
        assert iou(b, b) == pytest.approx(1.0)

    @given(boxes(min_size=0.01), boxes(min_size=0.01),
           st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
    def test_translation_invariant(self, a, b, dx, dy):
        # shift both boxes rigidly; clamp the shift so both stay in frame
        dx = max(-min(a.x1, b.x1), min(dx, 1.0 - max(a.x2, b.x2)))
        dy = max(-min(a.y1, b.y1), min(dy, 1.0 - max(a.y2, b.y2)))
        assert iou(a.translate(dx, dy), b.translate(dx, dy)) == pytest.approx(
            iou(a, b), abs=1e-9)
