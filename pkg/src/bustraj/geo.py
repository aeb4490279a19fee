"""Geodesic primitives: great-circle distance and point-to-polyline projection.

Projection math runs in an equirectangular frame centered on the query point,
which is accurate to well under a meter over the tens-of-meters offsets that
GPS noise produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EARTH_RADIUS_M = 6371008.8


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise GeometryError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise GeometryError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Projection:
    snapped: GeoPoint
    along_fraction: float
    offset_m: float
    edge_index: int = 0


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of mean Earth radius."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_array(lat1, lon1, lat2, lon2):
    """Vectorized haversine over numpy arrays of degrees."""
    lat1 = np.radians(lat1)
    lat2 = np.radians(lat2)
    dlat = lat2 - lat1
    dlon = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def edge_lengths(polyline: Sequence[GeoPoint]) -> np.ndarray:
    lat = np.array([p.lat for p in polyline])
    lon = np.array([p.lon for p in polyline])
    return haversine_array(lat[:-1], lon[:-1], lat[1:], lon[1:])


def polyline_length_m(polyline: Sequence[GeoPoint]) -> float:
    return float(edge_lengths(polyline).sum())


def to_local_xy(origin: GeoPoint, lat, lon):
    """East/north meters of (lat, lon) relative to origin, equirectangular."""
    k = math.radians(1.0) * EARTH_RADIUS_M
    x = (np.asarray(lon, dtype=float) - origin.lon) * k * math.cos(math.radians(origin.lat))
    y = (np.asarray(lat, dtype=float) - origin.lat) * k
    return x, y


def from_local_xy(origin: GeoPoint, x, y):
    k = math.radians(1.0) * EARTH_RADIUS_M
    lat = origin.lat + np.asarray(y, dtype=float) / k
    lon = origin.lon + np.asarray(x, dtype=float) / (k * math.cos(math.radians(origin.lat)))
    return lat, lon


def interpolate_along(polyline: Sequence[GeoPoint], fraction: float) -> GeoPoint:
    """Point at the given fraction of a polyline's length.

    Arc length along an edge is taken as linear in the vertex-to-vertex
    interpolation parameter, the same convention `project_onto_polyline` uses,
    so the two are exact inverses for points on the line.
    """
    lengths = edge_lengths(polyline)
    total = lengths.sum()
    if total <= 0:
        raise GeometryError("degenerate polyline: all vertices identical")
    target = min(max(fraction, 0.0), 1.0) * total
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    e = int(np.searchsorted(cum, target, side="right") - 1)
    e = min(max(e, 0), len(lengths) - 1)
    while lengths[e] == 0 and e > 0:
        e -= 1
    u = 0.0 if lengths[e] == 0 else min(max((target - cum[e]) / lengths[e], 0.0), 1.0)
    a, b = polyline[e], polyline[e + 1]
    return GeoPoint(a.lat + u * (b.lat - a.lat), a.lon + u * (b.lon - a.lon))


def project_onto_polyline(p: GeoPoint, polyline: Sequence[GeoPoint]) -> Projection:
    """Snap ``p`` to the nearest point of ``polyline``.

    Ties between equidistant edges go to the lowest edge index.
    """
    if len(polyline) < 2:
        raise GeometryError("polyline needs at least 2 vertices")
    lengths = edge_lengths(polyline)
    total = float(lengths.sum())
    if total <= 0:
        raise GeometryError("degenerate polyline: all vertices identical")

    lat = np.array([v.lat for v in polyline])
    lon = np.array([v.lon for v in polyline])
    x, y = to_local_xy(p, lat, lon)
    ax, ay, bx, by = x[:-1], y[:-1], x[1:], y[1:]
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(seg2 > 0, -(ax * dx + ay * dy) / seg2, 0.0)
    u = np.clip(u, 0.0, 1.0)
    px, py = ax + u * dx, ay + u * dy
    dist2 = px * px + py * py

    # near-ties resolve to the lowest edge index
    best = dist2.min()
    e = int(np.flatnonzero(dist2 <= best * (1 + 1e-9) + 1e-12)[0])
    ue = float(u[e])
    if ue == 0.0:
        snapped = polyline[e]
    elif ue == 1.0:
        snapped = polyline[e + 1]
    else:
        a, b = polyline[e], polyline[e + 1]
        snapped = GeoPoint(a.lat + ue * (b.lat - a.lat), a.lon + ue * (b.lon - a.lon))

    along = (float(lengths[:e].sum()) + ue * float(lengths[e])) / total
    along = min(max(along, 0.0), 1.0)
    return Projection(snapped, along, haversine_m(p, snapped), e)
