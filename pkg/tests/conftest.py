import numpy as np
import pytest

from bustraj.geo import GeoPoint, from_local_xy, polyline_length_m
from bustraj.ingest import RoutePattern, Segment

ORIGIN = GeoPoint(42.372642, -71.119048)


def straight_route(lengths, origin=ORIGIN, heading_deg=90.0, pattern_id="straight"):
    """Collinear segments laid end to end from ``origin`` along a compass heading."""
    h = np.radians(heading_deg)
    segs, s = [], 0.0
    for j, L in enumerate(lengths):
        xs = np.array([s, s + L]) * np.sin(h)
        ys = np.array([s, s + L]) * np.cos(h)
        lat, lon = from_local_xy(origin, xs, ys)
        poly = tuple(GeoPoint(float(a), float(b)) for a, b in zip(lat, lon))
        segs.append(Segment(f"s{j}", poly, polyline_length_m(poly)))
        s += L
    return RoutePattern(pattern_id, tuple(segs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def series_from_trip(trip):
    from bustraj.mapmatch import match_trip
    from bustraj.tripframe import build_series
    return build_series(match_trip(trip.heartbeats, trip.spec.pattern), trip.spec.pattern)


@pytest.fixture(scope="session")
def standard_trip():
    from bustraj.simulator import simulate, standard_trip_spec
    trip = simulate(standard_trip_spec())
    return trip, series_from_trip(trip)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
