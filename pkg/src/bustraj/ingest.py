"""Parse heartbeat records, route patterns and AVL door events.

Loaders never abort on a bad row. Row-level problems are collected on the
returned list's ``rejects`` attribute; only structural problems (missing
columns, bad GeoJSON) raise :class:`IngestError`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Optional, Union

from .geo import GeoPoint, GeometryError, polyline_length_m

log = logging.getLogger(__name__)

HEARTBEAT_COLUMNS = ("trip_id", "timestamp", "lat", "lon")
AVL_COLUMNS = ("trip_id", "open_at", "close_at", "stop_id")
LENGTH_TOLERANCE = 0.005

Source = Union[bytes, str, IO[bytes], IO[str]]


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str
    raw: str = ""


class Loaded(list):
    """A list of accepted records carrying the load's reject report."""

    def __init__(self, records=(), rejects=(), accepted_rows=None, truncated_subseconds=0):
        super().__init__(records)
        self.rejects: list[Reject] = list(rejects)
        self.accepted_rows = len(self) if accepted_rows is None else accepted_rows
        self.truncated_subseconds = truncated_subseconds

    @property
    def input_rows(self) -> int:
        return self.accepted_rows + len(self.rejects)


@dataclass(frozen=True)
class HeartbeatRecord:
    trip_id: str
    timestamp: int  # seconds since the Unix epoch, UTC
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")

    @property
    def point(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)


@dataclass(frozen=True)
class AvlDoorEvent:
    trip_id: str
    open_at: int
    close_at: int
    stop_id: Optional[str] = None

    def __post_init__(self):
        if not self.open_at < self.close_at:
            raise ValueError("close_at must be after open_at")


@dataclass(frozen=True)
class Segment:
    segment_id: str
    polyline: tuple[GeoPoint, ...]
    length_m: float


@dataclass(frozen=True)
class RoutePattern:
    pattern_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise IngestError("route pattern has no segments")
        for seg in self.segments:
            if len(seg.polyline) < 2:
                raise IngestError(f"segment {seg.segment_id}: polyline needs at least 2 vertices")
            if not seg.length_m > 0:
                raise IngestError(f"segment {seg.segment_id}: length_m must be positive")

    @property
    def lengths(self) -> list[float]:
        return [s.length_m for s in self.segments]

    @property
    def total_length_m(self) -> float:
        return math.fsum(self.lengths)

    def offset_of(self, segment_index: int) -> float:
        """Route distance at the start of a segment."""
        return math.fsum(self.lengths[:segment_index])


# -- timestamps ---------------------------------------------------------------


class _Clock:
    """Parses ISO-8601 instants, counting sub-second truncations."""

    def __init__(self):
        self.truncated = 0

    def parse(self, text: str) -> int:
        text = text.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        if dt.microsecond:
            self.truncated += 1
            dt = dt.replace(microsecond=0)
        return int(dt.timestamp())


def parse_instant(text: str) -> int:
    return _Clock().parse(text)


def format_instant(epoch_s: int) -> str:
    return datetime.fromtimestamp(int(epoch_s), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# -- helpers ------------------------------------------------------------------


def _text(source: Source) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, str):
        return source
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestError(f"input is not valid UTF-8: {exc}") from None


def _check_header(fieldnames, required, optional=()) -> None:
    if fieldnames is None:
        raise IngestError("missing header row")
    names = [f.strip() for f in fieldnames]
    for col in required:
        if col not in names and col not in optional:
            raise IngestError(f"missing column: {col}")


def _heartbeat_from(row: dict, clock: _Clock) -> HeartbeatRecord:
    trip_id = str(row.get("trip_id") or "").strip()
    if not trip_id:
        raise ValueError("empty trip_id")
    ts = row.get("timestamp")
    if ts is None or str(ts).strip() == "":
        raise ValueError("empty timestamp")
    try:
        timestamp = clock.parse(str(ts))
    except ValueError:
        raise ValueError(f"unparseable timestamp {ts!r}") from None
    try:
        lat = float(row["lat"])
        lon = float(row["lon"])
    except (TypeError, ValueError, KeyError):
        raise ValueError("lat/lon not numeric") from None
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError("lat/lon not finite")
    return HeartbeatRecord(trip_id, timestamp, lat, lon)


# -- loaders ------------------------------------------------------------------


def load_heartbeats(source: Source, format: str = "csv") -> Loaded:
    """Load heartbeat records in file order.

    ``format`` is ``"csv"`` (header ``trip_id,timestamp,lat,lon``) or
    ``"json-lines"`` (one object per line with the same keys).
    """
    text = _text(source)
    clock = _Clock()
    records, rejects = [], []
    if format == "csv":
        reader = csv.DictReader(io.StringIO(text))
        _check_header(reader.fieldnames, HEARTBEAT_COLUMNS)
        for row in reader:
            row = {k.strip(): v for k, v in row.items() if k is not None}
            try:
                records.append(_heartbeat_from(row, clock))
            except ValueError as exc:
                rejects.append(Reject(reader.line_num, str(exc), ",".join(str(v) for v in row.values())))
    elif format in ("json-lines", "jsonl"):
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                records.append(_heartbeat_from(obj, clock))
            except ValueError as exc:
                rejects.append(Reject(lineno, str(exc), line))
    else:
        raise IngestError(f"unknown heartbeat format {format!r}")
    if clock.truncated:
        log.warning("truncated sub-second timestamps on %d heartbeat rows", clock.truncated)
    for r in rejects:
        log.info("heartbeat reject line %d: %s", r.line, r.reason)
    return Loaded(records, rejects, truncated_subseconds=clock.truncated)


def load_avl_events(source: Source) -> Loaded:
    """Load door-open intervals, sorted by open time, overlaps merged per trip."""
    text = _text(source)
    clock = _Clock()
    reader = csv.DictReader(io.StringIO(text))
    _check_header(reader.fieldnames, AVL_COLUMNS, optional=("stop_id",))
    events, rejects = [], []
    for row in reader:
        row = {k.strip(): v for k, v in row.items() if k is not None}
        try:
            trip_id = (row.get("trip_id") or "").strip()
            if not trip_id:
                raise ValueError("empty trip_id")
            try:
                open_at = clock.parse(row.get("open_at") or "")
                close_at = clock.parse(row.get("close_at") or "")
            except ValueError:
                raise ValueError("unparseable open_at/close_at") from None
            if close_at <= open_at:
                raise ValueError("close_at must be after open_at")
            stop_id = (row.get("stop_id") or "").strip() or None
            events.append(AvlDoorEvent(trip_id, open_at, close_at, stop_id))
        except ValueError as exc:
            rejects.append(Reject(reader.line_num, str(exc), ",".join(str(v) for v in row.values())))
    accepted = len(events)
    return Loaded(merge_events(events), rejects, accepted_rows=accepted,
                  truncated_subseconds=clock.truncated)


def merge_events(events: Iterable[AvlDoorEvent]) -> list[AvlDoorEvent]:
    """Union overlapping (or touching) intervals of the same trip."""
    merged: dict[str, list[AvlDoorEvent]] = {}
    for ev in sorted(events, key=lambda e: (e.trip_id, e.open_at, e.close_at)):
        bucket = merged.setdefault(ev.trip_id, [])
        if bucket and ev.open_at <= bucket[-1].close_at:
            last = bucket[-1]
            if ev.close_at > last.close_at:
                bucket[-1] = AvlDoorEvent(last.trip_id, last.open_at, ev.close_at, last.stop_id)
        else:
            bucket.append(ev)
    out = [ev for bucket in merged.values() for ev in bucket]
    out.sort(key=lambda e: (e.open_at, e.trip_id))
    return out


def load_route_pattern(source: Source) -> RoutePattern:
    """Load a GeoJSON FeatureCollection of LineString segments.

    Each feature needs ``segment_id`` and ``sequence`` properties; sequences
    must run 1..n without gaps. A declared ``length_m`` must agree with the
    geometry to within 0.5%; when absent it is computed from the geometry.
    """
    try:
        doc = json.loads(_text(source))
    except json.JSONDecodeError as exc:
        raise IngestError(f"route is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise IngestError("route must be a GeoJSON FeatureCollection")
    features = doc.get("features") or []
    if not features:
        raise IngestError("route pattern has no segments")

    staged = []
    for k, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "LineString":
            raise IngestError(f"feature {k}: geometry must be LineString, got {geom.get('type')}")
        if "segment_id" not in props or "sequence" not in props:
            raise IngestError(f"feature {k}: missing segment_id or sequence property")
        seq = props["sequence"]
        if isinstance(seq, bool) or not isinstance(seq, (int, float)) or int(seq) != seq or seq < 1:
            raise IngestError(f"feature {k}: sequence must be an integer >= 1")
        try:
            polyline = tuple(GeoPoint(float(c[1]), float(c[0])) for c in geom.get("coordinates") or [])
        except (GeometryError, TypeError, ValueError, IndexError) as exc:
            raise IngestError(f"feature {k}: bad coordinates ({exc})") from None
        if len(polyline) < 2:
            raise IngestError(f"feature {k}: polyline needs at least 2 vertices")
        geodesic = polyline_length_m(polyline)
        if geodesic <= 0:
            raise IngestError(f"feature {k}: degenerate polyline")
        declared = props.get("length_m")
        if declared is None:
            length = geodesic
        else:
            length = float(declared)
            if not length > 0:
                raise IngestError(f"feature {k}: length_m must be positive")
            if abs(length - geodesic) > LENGTH_TOLERANCE * geodesic:
                raise IngestError(
                    f"feature {k}: length mismatch (declared {length:.1f} m, geometry {geodesic:.1f} m)")
        staged.append((int(seq), Segment(str(props["segment_id"]), polyline, length)))

    staged.sort(key=lambda s: s[0])
    seqs = [s[0] for s in staged]
    if seqs != list(range(1, len(seqs) + 1)):
        raise IngestError(f"non-contiguous sequence numbers: {seqs}")
    pattern_id = str(doc.get("pattern_id") or doc.get("name") or "pattern")
    return RoutePattern(pattern_id, tuple(s for _, s in staged))


# -- serializers --------------------------------------------------------------


def dump_heartbeats(records: Iterable[HeartbeatRecord], format: str = "csv") -> str:
    buf = io.StringIO()
    if format == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEARTBEAT_COLUMNS)
        for r in records:
            w.writerow([r.trip_id, format_instant(r.timestamp), repr(r.lat), repr(r.lon)])
    elif format in ("json-lines", "jsonl"):
        for r in records:
            buf.write(json.dumps({"trip_id": r.trip_id, "timestamp": format_instant(r.timestamp),
                                  "lat": r.lat, "lon": r.lon}) + "\n")
    else:
        raise IngestError(f"unknown heartbeat format {format!r}")
    return buf.getvalue()


def dump_avl_events(events: Iterable[AvlDoorEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AVL_COLUMNS)
    for e in events:
        w.writerow([e.trip_id, format_instant(e.open_at), format_instant(e.close_at), e.stop_id or ""])
    return buf.getvalue()


def dump_route_pattern(pattern: RoutePattern) -> str:
    features = []
    for k, seg in enumerate(pattern.segments, start=1):
        features.append({
            "type": "Feature",
            "properties": {"segment_id": seg.segment_id, "sequence": k, "length_m": seg.length_m},
            "geometry": {"type": "LineString", "coordinates": [[p.lon, p.lat] for p in seg.polyline]},
        })
    doc = {"type": "FeatureCollection", "pattern_id": pattern.pattern_id, "features": features}
    return json.dumps(doc, indent=1) + "\n"


# -- derived tables written by the CLI -----------------------------------------


def _columns(source: Source, columns) -> dict[str, list[str]]:
    reader = csv.DictReader(io.StringIO(_text(source)))
    _check_header(reader.fieldnames, columns)
    cols: dict[str, list[str]] = {c: [] for c in columns}
    for row in reader:
        for c in columns:
            cols[c].append(row[c])
    return cols


def load_series(source: Source):
    """Read a ``t_s,d_m`` table written by the ``frame`` stage."""
    from .tripframe import TimeDistanceSeries

    text = _text(source)
    origin_time, origin_offset = 0, 0.0
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "origin_time":
                origin_time = parse_instant(value)
            elif key.strip() == "origin_offset_m":
                origin_offset = float(value)
        else:
            body.append(line)
    cols = _columns("\n".join(body), ("t_s", "d_m"))
    return TimeDistanceSeries.from_arrays([float(v) for v in cols["t_s"]], [float(v) for v in cols["d_m"]],
                                          origin_time=origin_time, origin_offset_m=origin_offset)


def load_matched(source: Source):
    """Read a matched-point table written by the ``match`` stage."""
    from .mapmatch import MATCHED_COLUMNS, MatchedPoint

    reader = csv.DictReader(io.StringIO(_text(source)))
    _check_header(reader.fieldnames, MATCHED_COLUMNS)
    points, rejects = [], []
    for row in reader:
        try:
            points.append(MatchedPoint(
                index=int(row["i"]),
                time=parse_instant(row["timestamp"]),
                matched=GeoPoint(float(row["matched_lat"]), float(row["matched_lon"])),
                segment_index=int(row["segment_index"]),
                along_fraction=float(row["p"]),
                offset_m=float(row["offset_m"]),
                valid=row["valid"].strip().lower() in ("true", "1"),
                segment_id=row["segment_id"],
            ))
        except (ValueError, GeometryError) as exc:
            rejects.append(Reject(reader.line_num, str(exc)))
    return Loaded(points, rejects)


def load_samples(source: Source) -> dict[str, list[float]]:
    """Read a ``t_s,x_m,v_mps,a_mps2`` trajectory table."""
    cols = _columns(source, ("t_s", "x_m", "v_mps", "a_mps2"))
    return {k: [float(v) for v in vals] for k, vals in cols.items()}
