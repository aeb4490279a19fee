"""Shared helpers for the experiment scripts."""

from bustraj.mapmatch import match_trip
from bustraj.tripframe import build_series


def series_from_trip(trip):
    return build_series(match_trip(trip.heartbeats, trip.spec.pattern), trip.spec.pattern)
