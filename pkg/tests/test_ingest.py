import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bustraj.geo import GeoPoint
from bustraj.ingest import (AvlDoorEvent, HeartbeatRecord, IngestError, dump_avl_events, dump_heartbeats,
                            dump_route_pattern, format_instant, load_avl_events, load_heartbeats,
                            load_route_pattern, parse_instant)

from conftest import straight_route

HEADER = "trip_id,timestamp,lat,lon\n"


def test_reference_record_row_parses():
    # a published example heartbeat row
    recs = load_heartbeats((HEADER + "t1,2022-04-25T08:24:45Z,42.372642,-71.119048\n").encode())
    assert len(recs) == 1 and not recs.rejects
    r = recs[0]
    assert (r.trip_id, r.lat, r.lon) == ("t1", 42.372642, -71.119048)
    assert format_instant(r.timestamp) == "2022-04-25T08:24:45Z"


def test_header_only_is_empty_without_rejects():
    recs = load_heartbeats(HEADER.encode())
    assert list(recs) == [] and recs.rejects == []


def test_out_of_range_latitude_is_rejected_with_line_number():
    text = HEADER + "t1,2022-04-25T08:24:45Z,91.0,-71.1\nt1,2022-04-25T08:24:50Z,42.0,-71.1\n"
    recs = load_heartbeats(text.encode())
    assert len(recs) == 1
    (rej,) = recs.rejects
    assert rej.line == 2
    assert "lat" in rej.reason


def test_bad_timestamp_rejected():
    recs = load_heartbeats((HEADER + "t1,yesterday,42.0,-71.0\n").encode())
    assert len(recs) == 0 and len(recs.rejects) == 1


def test_missing_column_is_fatal_and_named():
    with pytest.raises(IngestError, match="lon"):
        load_heartbeats(b"trip_id,timestamp,lat\nt1,2022-04-25T08:24:45Z,42\n")


def test_json_lines_matches_csv():
    csv_text = HEADER + "a,2022-04-25T08:24:45Z,42.1,-71.2\na,2022-04-25T08:24:50Z,42.2,-71.3\n"
    jl = "\n".join(json.dumps({"trip_id": "a", "timestamp": ts, "lat": la, "lon": lo}) for ts, la, lo in
                   [("2022-04-25T08:24:45Z", 42.1, -71.2), ("2022-04-25T08:24:50Z", 42.2, -71.3)])
    assert list(load_heartbeats(csv_text.encode())) == list(load_heartbeats(jl.encode(), "json-lines"))


def test_subseconds_truncated():
    recs = load_heartbeats((HEADER + "t1,2022-04-25T08:24:45.900Z,42.0,-71.0\n").encode())
    assert format_instant(recs[0].timestamp) == "2022-04-25T08:24:45Z"
    assert recs.truncated_subseconds == 1


records = st.lists(st.builds(
    HeartbeatRecord,
    st.sampled_from(["t1", "trip 2", "x,y"]),
    st.integers(1_500_000_000, 1_800_000_000),
    st.floats(-90, 90, allow_nan=False),
    st.floats(-180, 180, allow_nan=False),
), max_size=20)


@settings(max_examples=50)
@given(records)
def test_heartbeat_round_trip(recs):
    for fmt in ("csv", "json-lines"):
        back = load_heartbeats(dump_heartbeats(recs, fmt).encode(), fmt)
        assert list(back) == recs and not back.rejects


def test_instant_round_trip():
    assert format_instant(parse_instant("2022-04-25T08:24:45Z")) == "2022-04-25T08:24:45Z"


def test_avl_events_merge_overlaps_per_trip():
    t0 = parse_instant("2022-04-25T08:00:00Z")
    evs = [AvlDoorEvent("a", t0, t0 + 10), AvlDoorEvent("a", t0 + 10, t0 + 20),
           AvlDoorEvent("a", t0 + 30, t0 + 40), AvlDoorEvent("b", t0 + 5, t0 + 15)]
    merged = load_avl_events(dump_avl_events(evs).encode())
    spans = sorted((e.trip_id, e.open_at - t0, e.close_at - t0) for e in merged)
    assert spans == [("a", 0, 20), ("a", 30, 40), ("b", 5, 15)]


def test_avl_open_after_close_rejected():
    text = "trip_id,open_at,close_at\na,2022-04-25T08:00:10Z,2022-04-25T08:00:00Z\n"
    ev = load_avl_events(text.encode())
    assert len(ev) == 0 and len(ev.rejects) == 1


def _feature(seq, coords, seg_id=None, length=None, geom="LineString"):
    props = {"segment_id": seg_id or f"s{seq}", "sequence": seq}
    if length is not None:
        props["length_m"] = length
    return {"type": "Feature", "properties": props, "geometry": {"type": geom, "coordinates": coords}}


def _fc(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)}).encode()


A = [[-71.0, 42.0], [-71.0, 42.001]]
B = [[-71.0, 42.001], [-71.0, 42.002]]


def test_route_sorted_by_sequence():
    pat = load_route_pattern(_fc(_feature(2, B), _feature(1, A)))
    assert [s.segment_id for s in pat.segments] == ["s1", "s2"]
    assert pat.segments[0].length_m == pytest.approx(111.19, rel=1e-3)


def test_route_non_contiguous_sequence_fatal():
    with pytest.raises(IngestError, match="non-contiguous sequence"):
        load_route_pattern(_fc(_feature(1, A), _feature(3, B)))


def test_route_length_mismatch_fatal():
    with pytest.raises(IngestError, match="length mismatch"):
        load_route_pattern(_fc(_feature(1, A, length=1000.0)))


def test_route_declared_length_within_tolerance_kept():
    pat = load_route_pattern(_fc(_feature(1, A, length=111.5)))
    assert pat.segments[0].length_m == 111.5


def test_route_rejects_non_linestring():
    with pytest.raises(IngestError):
        load_route_pattern(_fc(_feature(1, [-71.0, 42.0], geom="Point")))


def test_route_round_trip():
    pat = straight_route([120.0, 80.0, 200.0])
    back = load_route_pattern(dump_route_pattern(pat).encode())
    assert back.segments == pat.segments
    assert isinstance(back.segments[0].polyline[0], GeoPoint)
