"""Greedy forward-window map matching onto a fixed route pattern.

The route is known in advance, so instead of path inference over a road
network each heartbeat is projected onto a small window of segments starting
at the previously matched one. Points that would move the vehicle upstream or
that sit too far from the route are kept but flagged ``valid=False``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .geo import GeoPoint, Projection, project_onto_polyline
from .ingest import HeartbeatRecord, RoutePattern, format_instant

log = logging.getLogger(__name__)

MATCHED_COLUMNS = ("i", "timestamp", "matched_lat", "matched_lon", "segment_id",
                   "segment_index", "p", "offset_m", "valid")


class MatchError(ValueError):
    pass


@dataclass(frozen=True)
class MatchConfig:
    max_offset_m: float = 50.0
    lookahead_segments: int = 5

    def __post_init__(self):
        if not self.max_offset_m > 0:
            raise ValueError("max_offset_m must be positive")
        if self.lookahead_segments < 0:
            raise ValueError("lookahead_segments must be >= 0")


def match_config_default() -> MatchConfig:
    return MatchConfig()


@dataclass(frozen=True)
class MatchedPoint:
    index: int
    time: int
    matched: GeoPoint
    segment_index: int
    along_fraction: float
    offset_m: float
    valid: bool
    segment_id: str = ""
    reason: str = ""

    def __post_init__(self):
        if not 0.0 <= self.along_fraction <= 1.0:
            raise ValueError(f"along_fraction {self.along_fraction} outside [0, 1]")


def _project_all(p: GeoPoint, pattern: RoutePattern, lo: int, hi: int) -> list[Projection]:
    return [project_onto_polyline(p, pattern.segments[j].polyline) for j in range(lo, hi)]


def _best(projections: Sequence[Projection], start: int) -> tuple[int, Projection]:
    # strict < keeps the earliest segment on ties, i.e. the smallest advance
    best_j, best = start, projections[0]
    for k, pr in enumerate(projections[1:], start=1):
        if pr.offset_m < best.offset_m:
            best_j, best = start + k, pr
    return best_j, best


def match_trip(heartbeats: Sequence[HeartbeatRecord], pattern: RoutePattern,
               config: Optional[MatchConfig] = None) -> list[MatchedPoint]:
    """Snap each heartbeat onto ``pattern`` with a forward-progress constraint.

    The first point is matched against the whole pattern. Every later point
    searches segments ``prev .. prev + lookahead`` where ``prev`` is the
    segment of the last valid match, so ``segment_index`` never decreases
    across valid points. A point is invalid when its best offset in that
    window exceeds ``max_offset_m``; it is reported as ``"upstream"`` when an
    earlier segment would have matched it. Small backward moves along the
    current segment stay valid and are repaired by
    :func:`bustraj.tripframe.build_series`.
    """
    config = config or MatchConfig()
    if not heartbeats:
        raise MatchError("empty heartbeat list")
    n_seg = len(pattern.segments)
    out: list[MatchedPoint] = []
    prev: Optional[int] = None

    for i, hb in enumerate(heartbeats):
        p = hb.point
        if prev is None:
            lo, hi = 0, n_seg
        else:
            lo, hi = prev, min(n_seg, prev + config.lookahead_segments + 1)
        j, pr = _best(_project_all(p, pattern, lo, hi), lo)

        valid, reason = True, ""
        if pr.offset_m > config.max_offset_m:
            valid, reason = False, "offset"
            if prev is not None and lo > 0:
                # tell a backward jump apart from plain off-route noise
                jb, prb = _best(_project_all(p, pattern, 0, lo), 0)
                if prb.offset_m <= config.max_offset_m:
                    j, pr, reason = jb, prb, "upstream"

        out.append(MatchedPoint(
            index=i, time=hb.timestamp, matched=pr.snapped, segment_index=j,
            along_fraction=pr.along_fraction, offset_m=pr.offset_m, valid=valid,
            segment_id=pattern.segments[j].segment_id, reason=reason,
        ))
        if valid:
            prev = j

    if prev is None:
        raise MatchError("trip off-route: no point within max_offset_m")
    n_bad = sum(not m.valid for m in out)
    if n_bad:
        log.info("%d of %d points flagged invalid", n_bad, len(out))
    return out


def invalid_stretches(points: Sequence[MatchedPoint]) -> list[tuple[int, int]]:
    """Inclusive index ranges of consecutive invalid points."""
    runs, start, last = [], None, None
    for m in points:
        if not m.valid and start is None:
            start = m.index
        elif m.valid and start is not None:
            runs.append((start, last))
            start = None
        last = m.index
    if start is not None:
        runs.append((start, points[-1].index))
    return runs


def dump_matched(points: Sequence[MatchedPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATCHED_COLUMNS)
    for m in points:
        w.writerow([m.index, format_instant(m.time), repr(m.matched.lat), repr(m.matched.lon),
                    m.segment_id, m.segment_index, repr(m.along_fraction), repr(m.offset_m),
                    "true" if m.valid else "false"])
    return buf.getvalue()


def with_validity(point: MatchedPoint, valid: bool, reason: str = "") -> MatchedPoint:
    return replace(point, valid=valid, reason=reason)
