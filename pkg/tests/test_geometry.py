import math

import pytest
from hypothesis import given, strategies as st

from fpdp.geometry import (
    EMPTY,
    Box,
    Disc,
    EmptyRegion,
    Interval,
    diameter,
    distance,
    neighbor_minus,
    neighbor_plus,
    region_from_json,
    region_to_json,
)


class TestDistance:
    def test_zero(self):
        assert distance(0.0, 0.0) == 0.0

    def test_pythagorean(self):
        assert distance((0, 0), (3, 4)) == 5.0

    def test_l1(self):
        assert distance(1.0, -2.0, p=1) == 3.0

    def test_linf(self):
        assert distance((1, 5), (4, 7), p=math.inf) == 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            distance((0, 0), 1.0)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_symmetry(self, a, b):
        assert distance(a, b) == distance(b, a)


class TestDiameter:
    def test_interval(self):
        assert diameter(Interval(0, 1)) == 1.0

    def test_disc(self):
        assert diameter(Disc((2.0, -1.0), 3.0)) == 6.0

    def test_box_corner_to_corner(self):
        assert diameter(Box((0, 0), (1, 2))) == pytest.approx(math.sqrt(5))

    def test_box_linf(self):
        assert diameter(Box((0, 0), (1, 2)), p=math.inf) == 2.0


class TestNeighborhoods:
    def test_interval_dilate(self):
        assert neighbor_plus(Interval(0, 1), 0.1) == Interval(-0.1, 1.1)

    def test_disc_dilate(self):
        assert neighbor_plus(Disc((0, 0), 1.0), 0.5) == Disc((0.0, 0.0), 1.5)

    def test_zero_is_identity(self):
        s = Interval(-2, 5)
        assert neighbor_plus(s, 0.0) == s
        assert neighbor_minus(s, 0.0) == s

    def test_interval_erode(self):
        assert neighbor_minus(Interval(0, 1), 0.1) == Interval(0.1, 0.9)

    def test_over_erosion_is_empty(self):
        assert neighbor_minus(Interval(0, 1), 0.6) == EMPTY
        assert isinstance(neighbor_minus(Disc((0, 0), 1.0), 2.0), EmptyRegion)

    def test_square_erodes_to_smaller_square(self):
        side, shrink = 3.0, 0.25
        eroded = neighbor_minus(Box((0, 0), (side, side)), shrink)
        assert eroded == Box((shrink, shrink), (side - shrink, side - shrink))

    def test_disc_requires_l2(self):
        with pytest.raises(ValueError):
            neighbor_plus(Disc((0, 0), 1.0), 0.1, p=1)

    def test_negative_eps_rejected(self):
        with pytest.raises(ValueError):
            neighbor_plus(Interval(0, 1), -0.1)


INTERVALS = st.builds(
    lambda lo, w: Interval(lo, lo + w),
    st.floats(-20, 20), st.floats(0.1, 10),
)
EPS = st.floats(0, 3)


class TestDuality:
    @given(INTERVALS, EPS, st.floats(-40, 40))
    def test_erosion_is_complement_dilate_complement(self, s, eps, x):
        # x is in the eroded set iff no point outside s lies within eps of x
        in_eroded = neighbor_minus(s, eps).contains(x)
        dist_to_complement = max(0.0, min(x - s.lo, s.hi - x))
        expected = s.contains(x) and dist_to_complement >= eps
        assert in_eroded == expected

    @given(INTERVALS, EPS, EPS, st.floats(-40, 40))
    def test_monotone_in_eps(self, s, e1, e2, x):
        lo, hi = min(e1, e2), max(e1, e2)
        if neighbor_plus(s, lo).contains(x):
            assert neighbor_plus(s, hi).contains(x)
        if neighbor_minus(s, hi).contains(x):
            assert neighbor_minus(s, lo).contains(x)

    @given(INTERVALS, EPS, st.floats(-40, 40))
    def test_erode_dilate_recovers_convex(self, s, eps, x):
        if s.contains(x):
            assert neighbor_minus(neighbor_plus(s, eps), eps).contains(x)


class TestJsonCodec:
    @pytest.mark.parametrize("region", [
        Interval(-1.5, 2.0),
        Box((0, 0), (1, 2)),
        Disc((0.5, -0.5), 3.0),
    ])
    def test_round_trip(self, region):
        assert region_from_json(region_to_json(region)) == region

    def test_parse_errors(self):
        with pytest.raises(ValueError):
            region_from_json({"torus": [0, 1]})
        with pytest.raises(ValueError):
            region_from_json({"interval": [0, 1], "disc": {}})
