import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bustraj.geo import GeoPoint
from bustraj.ingest import RoutePattern, Segment, parse_instant
from bustraj.mapmatch import MatchedPoint
from bustraj.tripframe import (FrameError, TimeDistanceSeries, build_series, distance_into_trip, dump_series,
                               time_into_trip)
from bustraj.ingest import load_series

P = GeoPoint(0.0, 0.0)


def pattern(lengths):
    # geometry is irrelevant for the distance arithmetic; only lengths matter
    segs = tuple(Segment(f"s{j}", (GeoPoint(0, j * 0.01), GeoPoint(0, j * 0.01 + 0.001)), float(L))
                 for j, L in enumerate(lengths))
    return RoutePattern("p", segs)


def mp(i, t, seg, p, offset=0.0, valid=True):
    return MatchedPoint(i, int(t), P, seg, p, offset, valid)


def test_time_into_trip_reference_timestamps():
    ts = [parse_instant(f"2022-04-25T08:24:{s}Z") for s in ("45", "50", "57")]
    pts = [mp(i, t, 0, 0.5) for i, t in enumerate(ts)]
    np.testing.assert_array_equal(time_into_trip(pts), [0, 5, 12])


def test_time_into_trip_single_and_duplicates():
    np.testing.assert_array_equal(time_into_trip([mp(0, 100, 0, 0)]), [0])
    np.testing.assert_array_equal(time_into_trip([mp(0, 100, 0, 0), mp(1, 100, 0, 0.1)]), [0, 0])


def test_distance_hand_example():
    # 0-based segment indices; lengths [100, 50, 80]
    pts = [mp(0, 0, 0, 0.2), mp(1, 1, 0, 0.9), mp(2, 2, 2, 0.5)]
    d = distance_into_trip(pts, pattern([100, 50, 80]))
    np.testing.assert_array_equal(d, [0.0, 70.0, 170.0])


def test_distance_reference_fractions():
    # p values of the reference rows, first segment length chosen as 100 m
    d = distance_into_trip([mp(0, 0, 0, 0.639), mp(1, 5, 0, 0.940)], pattern([100]))
    assert d[0] == 0.0
    assert d[1] == pytest.approx(30.1, abs=1e-9)


def test_stationary_all_zero():
    d = distance_into_trip([mp(i, i, 1, 0.3) for i in range(4)], pattern([10, 20, 30]))
    np.testing.assert_array_equal(d, np.zeros(4))


def test_segment_outside_pattern():
    with pytest.raises(FrameError):
        distance_into_trip([mp(0, 0, 0, 0.1), mp(1, 1, 5, 0.1)], pattern([10, 20]))


def test_clean_input_unchanged():
    pts = [mp(i, 5 * i, 0, 0.1 * i) for i in range(5)]
    s = build_series(pts, pattern([100]))
    np.testing.assert_array_equal(s.t, [0, 5, 10, 15, 20])
    np.testing.assert_allclose(s.d, [0, 10, 20, 30, 40], atol=1e-12)


def test_small_regression_clamped():
    pts = [mp(0, 0, 0, 0.0), mp(1, 1, 0, 0.5), mp(2, 2, 0, 0.45), mp(3, 3, 0, 0.6)]
    s = build_series(pts, pattern([100]))
    np.testing.assert_allclose(s.d, [0, 50, 50, 60])


def test_large_regression_dropped():
    pts = [mp(0, 0, 0, 0.0), mp(1, 1, 2, 0.5), mp(2, 2, 0, 0.1), mp(3, 3, 2, 0.6), mp(4, 4, 2, 0.7)]
    s = build_series(pts, pattern([100, 100, 100]))
    np.testing.assert_array_equal(s.t, [0, 1, 3, 4])


def test_duplicate_timestamp_keeps_smallest_offset():
    pts = [mp(0, 0, 0, 0.0), mp(1, 7, 0, 0.2, offset=12.0), mp(2, 7, 0, 0.3, offset=3.0), mp(3, 9, 0, 0.5)]
    s = build_series(pts, pattern([100]))
    np.testing.assert_array_equal(s.t, [0, 7, 9])
    np.testing.assert_allclose(s.d, [0, 30, 50])


def test_invalid_dropped_and_insufficient_data():
    pts = [mp(0, 0, 0, 0.0), mp(1, 1, 0, 0.2, valid=False), mp(2, 2, 0, 0.3), mp(3, 3, 0, 0.4)]
    assert build_series(pts, pattern([100])).n == 3
    with pytest.raises(FrameError, match="insufficient data"):
        build_series(pts[:3], pattern([100]))


def test_series_invariants_enforced():
    with pytest.raises(ValueError):
        TimeDistanceSeries.from_arrays([0, 1, 1], [0, 1, 2])
    with pytest.raises(ValueError):
        TimeDistanceSeries.from_arrays([0, 1, 2], [0, 2, 1])
    with pytest.raises(ValueError):
        TimeDistanceSeries.from_arrays([1, 2, 3], [0, 1, 2])
    with pytest.raises(ValueError):
        TimeDistanceSeries.from_arrays([0, 1], [0, 1])


def test_series_round_trip():
    s = TimeDistanceSeries.from_arrays([0, 3, 9, 10], [0, 1.5, 1.5, 20.25], origin_time=1650875085,
                                       origin_offset_m=12.5)
    assert load_series(dump_series(s).encode()) == s


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 400), st.integers(0, 3), st.floats(0, 1),
                          st.floats(0, 60), st.booleans()), min_size=3, max_size=60))
def test_build_series_always_satisfies_invariants(rows):
    pat = pattern([120, 80, 200, 60])
    rows = sorted(rows, key=lambda r: r[0])
    pts = [mp(i, t, seg, p, off, valid) for i, (t, seg, p, off, valid) in enumerate(rows)]
    try:
        s = build_series(pts, pat)
    except FrameError:
        return
    assert s.t[0] == 0 and s.d[0] == 0 and s.n >= 3
    assert np.all(np.diff(s.t) > 0) and np.all(np.diff(s.d) >= 0)
    assert s.d[-1] <= pat.total_length_m - s.origin_offset_m + 1e-9
