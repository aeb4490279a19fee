"""Time-into-trip and distance-into-trip series from matched points."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import RoutePattern, format_instant
from .mapmatch import MatchedPoint

log = logging.getLogger(__name__)

# backward moves larger than this are treated as bad fixes, not jitter
MAX_BACKWARD_JUMP_M = 100.0


class FrameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeDistanceSeries:
    """Cleaned trip series: ``t`` strictly increasing from 0, ``d`` non-decreasing from 0.

    ``origin_offset_m`` is the route distance of the first point, so
    ``d + origin_offset_m`` is absolute distance along the pattern.
    """

    t: np.ndarray
    d: np.ndarray
    origin_time: int = 0
    origin_offset_m: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        d = np.asarray(self.d, dtype=float)
        t.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "d", d)
        if t.ndim != 1 or t.shape != d.shape:
            raise FrameError("t and d must be 1-d vectors of equal length")
        if len(t) < 3:
            raise FrameError("insufficient data: need at least 3 points")
        if t[0] != 0 or d[0] != 0:
            raise FrameError("series must start at t=0, d=0")
        if np.any(np.diff(t) <= 0):
            raise FrameError("t must be strictly increasing")
        if np.any(np.diff(d) < 0):
            raise FrameError("d must be non-decreasing")

    @classmethod
    def from_arrays(cls, t, d, origin_time: int = 0, origin_offset_m: float = 0.0):
        return cls(np.asarray(t, dtype=float), np.asarray(d, dtype=float), origin_time, origin_offset_m)

    @property
    def n(self) -> int:
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, TimeDistanceSeries):
            return NotImplemented
        return (np.array_equal(self.t, other.t) and np.array_equal(self.d, other.d)
                and self.origin_time == other.origin_time
                and self.origin_offset_m == other.origin_offset_m)


def time_into_trip(points: Sequence[MatchedPoint]) -> np.ndarray:
    """Whole seconds since the first point, for every valid point.

    Equal timestamps give equal values; deduplication is left to
    :func:`build_series`.
    """
    valid = [m for m in points if m.valid]
    if not valid:
        return np.zeros(0)
    s1 = valid[0].time
    return np.array([m.time - s1 for m in valid], dtype=float)


def route_distance(point: MatchedPoint, pattern: RoutePattern) -> float:
    """Absolute distance along the pattern: full upstream segments plus the partial one."""
    if not 0 <= point.segment_index < len(pattern.segments):
        raise FrameError(f"point {point.index} references segment {point.segment_index} "
                         f"outside the pattern ({len(pattern.segments)} segments)")
    return pattern.offset_of(point.segment_index) + pattern.segments[point.segment_index].length_m * point.along_fraction


def distance_into_trip(points: Sequence[MatchedPoint], pattern: RoutePattern) -> np.ndarray:
    """Route distance of each valid point relative to the first one."""
    valid = [m for m in points if m.valid]
    if not valid:
        return np.zeros(0)
    absolute = np.array([route_distance(m, pattern) for m in valid])
    return absolute - absolute[0]


def build_series(points: Sequence[MatchedPoint], pattern: RoutePattern) -> TimeDistanceSeries:
    """Drop invalid points, collapse duplicate times and repair small regressions.

    Among points sharing a timestamp the one with the smallest ``offset_m``
    survives. A point that falls more than 100 m behind the running maximum
    distance is discarded; smaller regressions are clamped up to the maximum.
    """
    valid = [m for m in points if m.valid]
    by_time: dict[int, MatchedPoint] = {}
    for m in valid:
        kept = by_time.get(m.time)
        if kept is None or m.offset_m < kept.offset_m:
            by_time[m.time] = m
    ordered = [by_time[k] for k in sorted(by_time)]
    if len(ordered) < 3:
        raise FrameError(f"insufficient data: {len(ordered)} usable points after cleaning, need 3")

    absolute = [route_distance(m, pattern) for m in ordered]
    kept_t, kept_x = [], []
    running = -math.inf
    clamped = dropped = 0
    for m, x in zip(ordered, absolute):
        if x < running - MAX_BACKWARD_JUMP_M:
            dropped += 1
            continue
        if x < running:
            clamped += 1
            x = running
        running = x
        kept_t.append(m.time)
        kept_x.append(x)
    if clamped or dropped:
        log.info("distance repair: %d clamped, %d dropped", clamped, dropped)
    if len(kept_t) < 3:
        raise FrameError(f"insufficient data: {len(kept_t)} usable points after cleaning, need 3")

    t = np.array(kept_t, dtype=float) - kept_t[0]
    x = np.array(kept_x)
    return TimeDistanceSeries(t, x - x[0], origin_time=int(kept_t[0]), origin_offset_m=float(x[0]))


def dump_series(series: TimeDistanceSeries) -> str:
    buf = io.StringIO()
    buf.write(f"# origin_time={format_instant(series.origin_time)}\n")
    buf.write(f"# origin_offset_m={series.origin_offset_m!r}\n")
    buf.write("t_s,d_m\n")
    for t, d in zip(series.t, series.d):
        buf.write(f"{float(t)!r},{float(d)!r}\n")
    return buf.getvalue()
