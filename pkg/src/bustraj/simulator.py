"""Synthetic bus trips with known ground-truth kinematics.

Motion is piecewise-constant acceleration, so truth position is exactly
quadratic between phase boundaries. The vehicle is placed on the route
geometry, sampled at whole-second heartbeat times drawn from a cadence
distribution, and each fix is perturbed with isotropic Gaussian noise.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geo import GeoPoint, from_local_xy, interpolate_along, polyline_length_m
from .ingest import (AvlDoorEvent, HeartbeatRecord, RoutePattern, Segment, dump_avl_events,
                     dump_heartbeats, dump_route_pattern, load_route_pattern)
from .tripframe import TimeDistanceSeries

TRUTH_HZ = 10
REALISTIC_ACCEL = (-2.37, 1.66)  # m/s^2, i.e. -5.3 / +3.7 mphps
# cadence mix over 3..10 s: median 6 s, mode 3 s
DEFAULT_CADENCE = {3: 0.25, 4: 0.10, 5: 0.10, 6: 0.15, 7: 0.10, 8: 0.10, 9: 0.10, 10: 0.10}
DEFAULT_START_TIME = 1650875085  # 2022-04-25T08:24:45Z


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimTripSpec:
    pattern: RoutePattern
    phases: tuple[tuple[float, float], ...]
    stop_plan: tuple[tuple[float, float], ...] = ()
    noise_sigma_m: float = 0.0
    sample_period_s: dict = field(default_factory=lambda: dict(DEFAULT_CADENCE))
    seed: int = 0
    start_offset_m: float = 0.0
    start_time: int = DEFAULT_START_TIME
    trip_id: str = "sim-1"
    door_margin_s: float = 1.0

    def __post_init__(self):
        if not self.phases:
            raise SimulationError("at least one phase is required")
        if any(d <= 0 for d, _ in self.phases):
            raise SimulationError("phase durations must be positive")
        if self.noise_sigma_m < 0:
            raise SimulationError("noise_sigma_m must be >= 0")
        periods = [int(p) for p in self.sample_period_s]
        if not periods or min(periods) < 1:
            raise SimulationError("sample periods must be whole seconds >= 1")

    @property
    def is_realistic(self) -> bool:
        lo, hi = REALISTIC_ACCEL
        return all(lo - 1e-12 <= a <= hi + 1e-12 for _, a in self.phases)


@dataclass
class SimTrip:
    truth: dict  # t, x (from trip start), x_route (absolute), v, a at 10 Hz
    heartbeats: list[HeartbeatRecord]
    avl_events: list[AvlDoorEvent]
    spec: SimTripSpec
    sample_t: np.ndarray = None  # whole seconds of each heartbeat

    def truth_at(self, t) -> dict:
        return kinematics(self.spec.phases, t, self.spec.start_offset_m)


# -- kinematics ---------------------------------------------------------------


def _phase_table(phases, x0: float = 0.0):
    starts, xs, vs = [0.0], [x0], [0.0]
    for dur, acc in phases:
        v_end = vs[-1] + acc * dur
        if v_end < -1e-9:
            raise SimulationError(f"phases drive the speed negative ({v_end:.3f} m/s)")
        xs.append(xs[-1] + vs[-1] * dur + 0.5 * acc * dur * dur)
        vs.append(0.0 if v_end < 1e-9 else v_end)
        starts.append(starts[-1] + dur)
    return np.array(starts), np.array(xs), np.array(vs), np.array([a for _, a in phases])


def kinematics(phases, t, x0: float = 0.0) -> dict:
    """Exact position, speed and acceleration at times ``t``."""
    starts, xs, vs, accs = _phase_table(phases, x0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(accs) - 1)
    s = t - starts[k]
    a = accs[k]
    v = np.maximum(vs[k] + a * s, 0.0)
    x = xs[k] + vs[k] * s + 0.5 * a * s * s
    return {"t": t, "x_route": x, "v": v, "a": a}


def duration(phases) -> float:
    return float(sum(d for d, _ in phases))


def stationary_intervals(phases, x0: float = 0.0):
    """(start, end, position) of every phase where the vehicle is at rest."""
    starts, xs, vs, accs = _phase_table(phases, x0)
    out = []
    for k, acc in enumerate(accs):
        if acc == 0 and vs[k] == 0:
            if out and abs(out[-1][1] - starts[k]) < 1e-9 and abs(out[-1][2] - xs[k]) < 1e-9:
                out[-1] = (out[-1][0], starts[k + 1], xs[k])
            else:
                out.append((starts[k], starts[k + 1], xs[k]))
    return out


def plan_phases(stops: Sequence[tuple], start_offset_m: float = 0.0, end_m: Optional[float] = None,
                cruise_mps: float = 11.0, accel_mps2: float = 1.2, decel_mps2: float = 1.5,
                initial_dwell_s: float = 0.0) -> tuple[tuple[float, float], ...]:
    """Phases that start at rest, halt exactly at each stop and finish at ``end_m``.

    ``stops`` holds ``(distance_m, hold_s)`` or ``(distance_m, hold_s,
    cruise_mps)`` tuples; the optional third entry overrides the cruise speed
    of the leg leading to that stop. Each leg accelerates, cruises and brakes;
    legs too short to reach cruise speed peak at the highest speed that still
    allows stopping on the mark.
    """
    phases: list[tuple[float, float]] = []
    if initial_dwell_s > 0:
        phases.append((initial_dwell_s, 0.0))
    pos = start_offset_m
    targets = list(stops) + ([(end_m, 0.0)] if end_m is not None else [])
    for stop in targets:
        dist, hold = stop[0], stop[1]
        v = stop[2] if len(stop) > 2 else cruise_mps
        gap = dist - pos
        if gap <= 0:
            raise SimulationError(f"stop at {dist} m is not ahead of {pos} m")
        ramp = v * v / (2 * accel_mps2) + v * v / (2 * decel_mps2)
        if ramp > gap:
            v = math.sqrt(2 * gap * accel_mps2 * decel_mps2 / (accel_mps2 + decel_mps2))
            ramp = gap
        phases.append((v / accel_mps2, accel_mps2))
        if gap - ramp > 1e-9:
            phases.append(((gap - ramp) / v, 0.0))
        phases.append((v / decel_mps2, -decel_mps2))
        if hold > 0:
            phases.append((hold, 0.0))
        pos = dist
    return tuple(phases)


# -- routes ---------------------------------------------------------------------


def make_route(n_segments: int = 24, seed: int = 7, origin: GeoPoint = GeoPoint(42.372642, -71.119048),
               seg_len_m=(250.0, 450.0), pattern_id: str = "sim-route") -> RoutePattern:
    """A gently winding route of connected segments with a few vertices each."""
    rng = np.random.default_rng(seed)
    heading = math.radians(135.0)
    x, y = 0.0, 0.0
    segments = []
    for j in range(n_segments):
        length = rng.uniform(*seg_len_m)
        n_edges = int(rng.integers(2, 5))
        pts = [(x, y)]
        for _ in range(n_edges):
            heading += math.radians(rng.uniform(-12.0, 12.0))
            step = length / n_edges
            x += step * math.sin(heading)
            y += step * math.cos(heading)
            pts.append((x, y))
        lat, lon = from_local_xy(origin, [p[0] for p in pts], [p[1] for p in pts])
        poly = tuple(GeoPoint(float(a), float(b)) for a, b in zip(lat, lon))
        segments.append(Segment(f"seg-{j:03d}", poly, polyline_length_m(poly)))
    return RoutePattern(pattern_id, tuple(segments))


def place_on_route(pattern: RoutePattern, x_route: float) -> GeoPoint:
    total = pattern.total_length_m
    x_route = min(max(x_route, 0.0), total)
    acc = 0.0
    for seg in pattern.segments:
        if x_route <= acc + seg.length_m:
            return interpolate_along(seg.polyline, (x_route - acc) / seg.length_m)
        acc += seg.length_m
    return pattern.segments[-1].polyline[-1]


# -- simulation -----------------------------------------------------------------


def simulate(spec: SimTripSpec) -> SimTrip:
    """Generate truth, noisy heartbeats and door events; deterministic given ``spec.seed``."""
    total = spec.pattern.total_length_m
    for dist, _ in spec.stop_plan:
        if dist > total or dist < 0:
            raise SimulationError(f"stop at {dist} m is beyond the pattern length {total:.1f} m")
    t_end = duration(spec.phases)
    final = kinematics(spec.phases, [t_end], spec.start_offset_m)["x_route"][0]
    if final > total + 1e-6:
        raise SimulationError(f"phases drive past the end of the pattern ({final:.1f} > {total:.1f} m)")

    rng = np.random.default_rng(spec.seed)

    grid = np.arange(int(math.floor(t_end * TRUTH_HZ)) + 1) / TRUTH_HZ
    kin = kinematics(spec.phases, grid, spec.start_offset_m)
    truth = {"t": grid, "x": kin["x_route"] - spec.start_offset_m, "x_route": kin["x_route"],
             "v": kin["v"], "a": kin["a"]}

    periods = np.array(sorted(int(p) for p in spec.sample_period_s))
    weights = np.array([spec.sample_period_s[p] if p in spec.sample_period_s else spec.sample_period_s[str(p)]
                        for p in periods], dtype=float)
    weights = weights / weights.sum()
    times = [0]
    while True:
        nxt = times[-1] + int(rng.choice(periods, p=weights))
        if nxt > t_end:
            break
        times.append(nxt)
    sample_t = np.array(times, dtype=float)
    x_samples = kinematics(spec.phases, sample_t, spec.start_offset_m)["x_route"]

    heartbeats = []
    for t, xr in zip(times, x_samples):
        p = place_on_route(spec.pattern, float(xr))
        if spec.noise_sigma_m > 0:
            dx, dy = rng.normal(0.0, spec.noise_sigma_m, size=2)
            lat, lon = from_local_xy(p, dx, dy)
            p = GeoPoint(float(lat), float(lon))
        heartbeats.append(HeartbeatRecord(spec.trip_id, spec.start_time + t, p.lat, p.lon))

    events = door_events(spec)
    return SimTrip(truth, heartbeats, events, spec, sample_t)


def door_events(spec: SimTripSpec) -> list[AvlDoorEvent]:
    rests = stationary_intervals(spec.phases, spec.start_offset_m)
    events = []
    for k, (dist, dwell) in enumerate(spec.stop_plan):
        match = [r for r in rests if abs(r[2] - dist) < 1.0]
        if not match:
            raise SimulationError(f"vehicle never rests at stop {k} ({dist} m)")
        start, end, _ = match[0]
        open_s = math.ceil(start + spec.door_margin_s)
        close_s = min(open_s + int(round(dwell)), math.floor(end - spec.door_margin_s))
        if close_s <= open_s:
            raise SimulationError(f"rest at stop {k} is too short for a door event")
        events.append(AvlDoorEvent(spec.trip_id, spec.start_time + open_s, spec.start_time + close_s,
                                   f"stop-{k:02d}"))
    return events


def truth_series(trip: SimTrip) -> TimeDistanceSeries:
    """Noise-free distance-into-trip at the heartbeat times."""
    x = trip.truth_at(trip.sample_t)["x_route"]
    return TimeDistanceSeries.from_arrays(trip.sample_t, x - x[0], trip.spec.start_time,
                                          float(x[0]))


def position_rmse(trip: SimTrip, series: TimeDistanceSeries, traj) -> float:
    """RMS position error of ``traj`` against the 10 Hz truth over its domain.

    The series measures distance from its first matched point, so the truth is
    compared in absolute route distance using ``series.origin_offset_m``.
    """
    shift = series.origin_time - trip.spec.start_time
    t = trip.truth["t"] - shift
    keep = (t >= 0) & (t <= traj.domain[1])
    est = np.asarray(traj.position(t[keep])) + series.origin_offset_m
    return float(np.sqrt(np.mean((est - trip.truth["x_route"][keep]) ** 2)))


# -- standard scenario ----------------------------------------------------------


def standard_trip_spec(seed: int = 2022, noise_sigma_m: float = 5.0) -> SimTripSpec:
    """The reference synthetic trip: ~8.5 km of peak-hour urban running.

    Legs between halts cruise at 4.5-7 m/s (10-16 mph) except for one
    stop-free 1.2 km stretch at 11 m/s (25 mph). Halts come every 300-500 m;
    three in four are bus stops with 20-60 s door-open dwells, the rest are
    10-35 s signal waits without door activity. Heartbeats follow the default
    3-10 s cadence (median 6 s) with 5 m GPS noise.
    """
    rng = np.random.default_rng(seed)
    pattern = make_route(n_segments=24, seed=seed)
    total = pattern.total_length_m
    start = 40.0
    fast_from = 0.5 * total
    halts, stop_plan = [], []
    pos = start
    while True:
        if fast_from <= pos < fast_from + 1200.0:
            pos += 1200.0
            cruise = 11.0
        else:
            pos += rng.uniform(300.0, 500.0)
            cruise = rng.uniform(4.5, 7.0)
        if pos > total - 300.0:
            break
        if rng.uniform() < 0.25:
            halts.append((pos, float(rng.uniform(10.0, 35.0)), cruise))  # signal, no doors
        else:
            dwell = float(rng.integers(20, 61))
            halts.append((pos, dwell + 2.0, cruise))
            stop_plan.append((pos, dwell))
    phases = plan_phases(halts, start_offset_m=start, end_m=total - 100.0, cruise_mps=6.0,
                         accel_mps2=1.2, decel_mps2=1.5, initial_dwell_s=5.0)
    return SimTripSpec(pattern=pattern, phases=phases, stop_plan=tuple(stop_plan), noise_sigma_m=noise_sigma_m,
                       seed=seed, start_offset_m=start, trip_id="std-1")


# -- files ------------------------------------------------------------------------


def spec_to_json(spec: SimTripSpec, route_path: str = "route.geojson") -> dict:
    return {
        "route": route_path,
        "phases": [list(p) for p in spec.phases],
        "stop_plan": [list(s) for s in spec.stop_plan],
        "noise_sigma_m": spec.noise_sigma_m,
        "sample_period_s": {str(k): v for k, v in spec.sample_period_s.items()},
        "seed": spec.seed,
        "start_offset_m": spec.start_offset_m,
        "start_time": spec.start_time,
        "trip_id": spec.trip_id,
        "door_margin_s": spec.door_margin_s,
    }


def spec_from_json(doc: dict, base_dir: str = ".") -> SimTripSpec:
    """Build a spec from JSON; ``"standard": true`` starts from the reference trip."""
    if doc.get("standard"):
        std = standard_trip_spec(seed=int(doc.get("seed", 2022)),
                                 noise_sigma_m=float(doc.get("noise_sigma_m", 5.0)))
        return std
    if "route" not in doc or "phases" not in doc:
        raise SimulationError("spec needs 'route' and 'phases' (or 'standard': true)")
    route = doc["route"]
    if isinstance(route, dict):
        pattern = load_route_pattern(json.dumps(route))
    else:
        with open(os.path.join(base_dir, route), "rb") as fh:
            pattern = load_route_pattern(fh)
    cadence = doc.get("sample_period_s") or DEFAULT_CADENCE
    if isinstance(cadence, (list, tuple)):
        cadence = {int(p): 1.0 for p in cadence}
    else:
        cadence = {int(k): float(v) for k, v in cadence.items()}
    return SimTripSpec(
        pattern=pattern,
        phases=tuple((float(d), float(a)) for d, a in doc["phases"]),
        stop_plan=tuple((float(x), float(w)) for x, w in doc.get("stop_plan", ())),
        noise_sigma_m=float(doc.get("noise_sigma_m", 0.0)),
        sample_period_s=cadence,
        seed=int(doc.get("seed", 0)),
        start_offset_m=float(doc.get("start_offset_m", 0.0)),
        start_time=int(doc.get("start_time", DEFAULT_START_TIME)),
        trip_id=str(doc.get("trip_id", "sim-1")),
        door_margin_s=float(doc.get("door_margin_s", 1.0)),
    )


def dump_truth(trip: SimTrip) -> str:
    lines = ["t_s,x_m,x_route_m,v_mps,a_mps2"]
    tr = trip.truth
    for row in zip(tr["t"], tr["x"], tr["x_route"], tr["v"], tr["a"]):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_trip(trip: SimTrip, out_dir: str) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "heartbeats.csv": dump_heartbeats(trip.heartbeats),
        "avl.csv": dump_avl_events(trip.avl_events),
        "truth.csv": dump_truth(trip),
        "route.geojson": dump_route_pattern(trip.spec.pattern),
    }
    paths = {}
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = path
    return paths


# -- random series for property tests ---------------------------------------------


def random_series(rng: np.random.Generator, n: int, noise_m: float = 3.0) -> TimeDistanceSeries:
    """A plausible noisy, already-cleaned series: irregular gaps, stops, jitter clamped away."""
    gaps = rng.choice(np.arange(1, 11), size=n - 1)
    t = np.concatenate([[0.0], np.cumsum(gaps)]).astype(float)
    speed = np.clip(rng.normal(8.0, 4.0, size=n - 1), 0.0, None)
    speed[rng.uniform(size=n - 1) < 0.2] = 0.0
    truth = np.concatenate([[0.0], np.cumsum(speed * gaps)])
    d = truth + rng.normal(0.0, noise_m, size=n)
    d = np.maximum.accumulate(d)
    d = d - d[0]
    return TimeDistanceSeries.from_arrays(t, d)
