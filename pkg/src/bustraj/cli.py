"""Command-line interface: match -> frame -> reconstruct -> evaluate, plus simulate and sample.

Exit codes: 0 success, 1 completed with validation failures (rejected input
rows, no AVL overlap), 2 fatal input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import ingest, mapmatch, simulator, tripframe, validation
from .smoothing import Algorithm, LocregConfig, fit, sample
from .validation import DEFAULT_ACCEL_BOUNDS_MPHPS, DEFAULT_THRESHOLDS_MPH

log = logging.getLogger("bustraj")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

FATAL_INPUT = (ingest.IngestError, mapmatch.MatchError, tripframe.FrameError, simulator.SimulationError,
               FileNotFoundError, ValueError)


class StageError(Exception):
    def __init__(self, stage: str, message: str, code: int = EXIT_INPUT):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.code = code


@dataclass
class RunConfig:
    heartbeats: Optional[str] = None
    route: Optional[str] = None
    avl: Optional[str] = None
    heartbeat_format: str = "csv"
    algorithms: tuple[Algorithm, ...] = tuple(Algorithm)
    locreg: LocregConfig = field(default_factory=LocregConfig)
    match: mapmatch.MatchConfig = field(default_factory=mapmatch.MatchConfig)
    thresholds_mph: tuple[float, ...] = DEFAULT_THRESHOLDS_MPH
    accel_bounds_mphps: tuple[float, float] = DEFAULT_ACCEL_BOUNDS_MPHPS
    accel_hz: float = 1.0
    sample_hz: float = 1.0
    out_dir: str = "."
    jobs: int = 1


# -- file helpers -------------------------------------------------------------


def _read(stage: str, path: Optional[str]) -> bytes:
    if not path:
        raise StageError(stage, "no file given")
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except FileNotFoundError:
        raise StageError(stage, "file not found") from None
    except OSError as exc:
        raise StageError(stage, str(exc)) from None


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _stage(name: str):
    """Context manager turning known input errors into a StageError for ``name``."""

    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is None or isinstance(exc, StageError):
                return False
            if isinstance(exc, FATAL_INPUT):
                raise StageError(name, str(exc)) from exc
            return False

    return _Guard()


def dump_samples(cols: dict) -> str:
    lines = ["t_s,x_m,v_mps,a_mps2"]
    for row in zip(cols["t_s"], cols["x_m"], cols["v_mps"], cols["a_mps2"]):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# -- stages -------------------------------------------------------------------


def load_inputs(cfg: RunConfig):
    with _stage("route"):
        pattern = ingest.load_route_pattern(_read("route", cfg.route))
    with _stage("heartbeats"):
        hbs = ingest.load_heartbeats(_read("heartbeats", cfg.heartbeats), cfg.heartbeat_format)
    events = None
    if cfg.avl:
        with _stage("avl"):
            events = ingest.load_avl_events(_read("avl", cfg.avl))
    return pattern, hbs, events


def group_trips(records: Sequence[ingest.HeartbeatRecord]) -> dict[str, list[ingest.HeartbeatRecord]]:
    trips: dict[str, list[ingest.HeartbeatRecord]] = {}
    for r in records:
        trips.setdefault(r.trip_id, []).append(r)
    for rs in trips.values():
        rs.sort(key=lambda r: r.timestamp)
    return trips


def match_stage(records, pattern, cfg: RunConfig):
    with _stage("match"):
        return mapmatch.match_trip(records, pattern, cfg.match)


def frame_stage(points, pattern):
    with _stage("frame"):
        return tripframe.build_series(points, pattern)


def evaluate_stage(series, events, trip_id: str, cfg: RunConfig) -> tuple[dict, bool]:
    """Scorecard JSON and whether the AVL comparison failed."""
    trip_events = [e for e in events if e.trip_id == trip_id] if events else []
    avl_failed = False
    with _stage("evaluate"):
        try:
            card = validation.build_scorecard(series, trip_events, cfg.locreg, cfg.algorithms, cfg.thresholds_mph,
                                              cfg.accel_bounds_mphps, cfg.accel_hz)
        except validation.ValidationError as exc:
            log.warning("evaluate: %s", exc)
            avl_failed = True
            card = validation.build_scorecard(series, (), cfg.locreg, cfg.algorithms, cfg.thresholds_mph,
                                              cfg.accel_bounds_mphps, cfg.accel_hz)
    report = card.to_json(trip_id)
    report["n_points"] = series.n
    report["thresholds_mph"] = list(cfg.thresholds_mph)
    report["accel_bounds_mphps"] = list(cfg.accel_bounds_mphps)
    return report, avl_failed


def run_trip(trip_id: str, records, pattern, events, cfg: RunConfig, out_dir: str) -> int:
    points = match_stage(records, pattern, cfg)
    _write(os.path.join(out_dir, "matched.csv"), mapmatch.dump_matched(points))
    series = frame_stage(points, pattern)
    _write(os.path.join(out_dir, "series.csv"), tripframe.dump_series(series))
    for alg in cfg.algorithms:
        with _stage("reconstruct"):
            traj = fit(series, alg, cfg.locreg)
            cols = sample(traj, cfg.sample_hz)
        _write(os.path.join(out_dir, f"trajectory_{alg.slug}.csv"), dump_samples(cols))
    report, avl_failed = evaluate_stage(series, events, trip_id, cfg)
    _write(os.path.join(out_dir, "report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_VALIDATION if avl_failed else EXIT_OK


def _run_trip_job(args):
    trip_id, records, pattern, events, cfg, out_dir = args
    try:
        return trip_id, run_trip(trip_id, records, pattern, events, cfg, out_dir), None
    except StageError as exc:
        return trip_id, exc.code, str(exc)


def run_pipeline(cfg: RunConfig) -> int:
    """Run every stage for every trip in the heartbeat file; returns an exit status."""
    pattern, hbs, events = load_inputs(cfg)
    status = EXIT_VALIDATION if (hbs.rejects or (events is not None and events.rejects)) else EXIT_OK
    trips = group_trips(hbs)
    if not trips:
        raise StageError("heartbeats", "no usable heartbeat records")
    jobs = []
    for trip_id, records in trips.items():
        out_dir = cfg.out_dir if len(trips) == 1 else os.path.join(cfg.out_dir, trip_id)
        jobs.append((trip_id, records, pattern, events, cfg, out_dir))

    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_trip_job, jobs))
    else:
        results = [_run_trip_job(j) for j in jobs]

    fatal = [(tid, code, msg) for tid, code, msg in results if msg]
    for tid, _, msg in fatal:
        print(f"{msg}" if len(trips) == 1 else f"[{tid}] {msg}", file=sys.stderr)
    if fatal and len(fatal) == len(results):
        return max(code for _, code, _ in fatal)
    codes = [code for _, code, _ in results]
    return max([status, *codes]) if not fatal else max(status, EXIT_VALIDATION)


# -- argument handling --------------------------------------------------------


def _algorithms(value) -> tuple[Algorithm, ...]:
    if value in (None, "", "all"):
        return tuple(Algorithm)
    if isinstance(value, str):
        value = value.split(",")
    return tuple(Algorithm.parse(v) for v in value)


def _floats(value) -> tuple[float, ...]:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(float(v) for v in value)


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over an optional JSON config file; flags win."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            raise StageError("config", "file not found") from None
        except json.JSONDecodeError as exc:
            raise StageError("config", f"invalid JSON ({exc})") from None

    def pick(name, default=None):
        v = getattr(args, name, None)
        if v is not None:
            return v
        return file_cfg.get(name, default)

    try:
        locreg = LocregConfig(degree=int(pick("degree", 3)), bandwidth_points=int(pick("bandwidth_points", 20)),
                              kernel=str(pick("kernel", "tricube")))
        match = mapmatch.MatchConfig(max_offset_m=float(pick("max_offset_m", 50.0)),
                                     lookahead_segments=int(pick("lookahead_segments", 5)))
        sample_hz = float(pick("sample_hz", 1.0))
        accel_hz = float(pick("accel_hz", 1.0))
        jobs = int(pick("jobs", 1))
        if sample_hz <= 0 or accel_hz <= 0 or jobs < 1:
            raise ValueError("sample rates must be positive and jobs >= 1")
        return RunConfig(
            heartbeats=pick("heartbeats"), route=pick("route"), avl=pick("avl"),
            heartbeat_format=pick("heartbeat_format", "csv"),
            algorithms=_algorithms(pick("algorithm")),
            locreg=locreg, match=match,
            thresholds_mph=_floats(pick("thresholds", DEFAULT_THRESHOLDS_MPH)),
            accel_bounds_mphps=tuple(_floats(pick("accel_bounds", DEFAULT_ACCEL_BOUNDS_MPHPS))),
            accel_hz=accel_hz, sample_hz=sample_hz, out_dir=pick("out", "."), jobs=jobs,
        )
    except ValueError as exc:
        raise StageError("config", str(exc)) from None


def _add_common(p: argparse.ArgumentParser, *, avl=False, smoothing=False):
    p.add_argument("--config", help="JSON file of option defaults; flags override it")
    p.add_argument("--heartbeats", help="heartbeat CSV or JSON-lines file")
    p.add_argument("--heartbeat-format", dest="heartbeat_format", choices=["csv", "json-lines"])
    p.add_argument("--route", help="route pattern GeoJSON")
    p.add_argument("--max-offset-m", dest="max_offset_m", type=float)
    p.add_argument("--lookahead-segments", dest="lookahead_segments", type=int)
    p.add_argument("--out", help="output directory")
    if avl:
        p.add_argument("--avl", help="AVL door-event CSV")
        p.add_argument("--thresholds", help="comma-separated stop-speed thresholds in mph")
        p.add_argument("--accel-bounds", dest="accel_bounds", help="min,max plausible acceleration in mphps")
        p.add_argument("--accel-hz", dest="accel_hz", type=float)
    if smoothing:
        p.add_argument("--series", help="t,d CSV written by 'frame' (instead of --heartbeats/--route)")
        p.add_argument("--algorithm", help="lseg, pchip, locreg, locreg-pchip, or all")
        p.add_argument("--sample-hz", dest="sample_hz", type=float)
        p.add_argument("--bandwidth-points", dest="bandwidth_points", type=int)
        p.add_argument("--degree", type=int)
        p.add_argument("--kernel")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bustraj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="snap heartbeats to the route; writes matched.csv")
    _add_common(p)

    p = sub.add_parser("frame", help="time/distance-into-trip series; writes series.csv")
    _add_common(p)
    p.add_argument("--matched", help="matched.csv from 'match' (instead of --heartbeats)")

    p = sub.add_parser("reconstruct", help="fit trajectories; writes trajectory_<alg>.csv")
    _add_common(p, smoothing=True)

    p = sub.add_parser("evaluate", help="score algorithms; writes report.json")
    _add_common(p, avl=True, smoothing=True)

    p = sub.add_parser("sample", help="print x, v, a of a trajectory at given times")
    _add_common(p, smoothing=True)
    p.add_argument("--at", required=True, help="comma-separated seconds into trip")

    p = sub.add_parser("simulate", help="write a synthetic trip (heartbeats, avl, truth, route)")
    p.add_argument("--spec", help="trip spec JSON; defaults to the standard synthetic trip")
    p.add_argument("--out-dir", dest="out_dir", default=".", help="output directory")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--print-spec", action="store_true", help="print the standard spec JSON and exit")

    p = sub.add_parser("pipeline", help="run match, frame, reconstruct and evaluate")
    _add_common(p, avl=True, smoothing=True)
    p.add_argument("--jobs", type=int, help="trips processed in parallel")
    p.add_argument("--seed", type=int, help="accepted for symmetry with simulate; the pipeline is deterministic")
    return parser


def _series_from_args(args, cfg: RunConfig):
    if getattr(args, "series", None):
        with _stage("series"):
            return ingest.load_series(_read("series", args.series)), "series"
    pattern, hbs, _ = load_inputs(replace(cfg, avl=None))
    trips = group_trips(hbs)
    if len(trips) != 1:
        raise StageError("heartbeats", f"expected one trip, found {len(trips)}; use 'pipeline'")
    (trip_id, records), = trips.items()
    points = match_stage(records, pattern, cfg)
    return frame_stage(points, pattern), trip_id


def _cmd_match(args, cfg):
    pattern, hbs, _ = load_inputs(cfg)
    trips = group_trips(hbs)
    if len(trips) != 1:
        raise StageError("heartbeats", f"expected one trip, found {len(trips)}; use 'pipeline'")
    points = match_stage(next(iter(trips.values())), pattern, cfg)
    _write(os.path.join(cfg.out_dir, "matched.csv"), mapmatch.dump_matched(points))
    stretches = mapmatch.invalid_stretches(points)
    if stretches:
        log.info("invalid stretches (point indices): %s", stretches)
    return EXIT_VALIDATION if hbs.rejects else EXIT_OK


def _cmd_frame(args, cfg):
    if args.matched:
        with _stage("route"):
            pattern = ingest.load_route_pattern(_read("route", cfg.route))
        with _stage("matched"):
            points = ingest.load_matched(_read("matched", args.matched))
        series = frame_stage(points, pattern)
    else:
        series, _ = _series_from_args(args, cfg)
    _write(os.path.join(cfg.out_dir, "series.csv"), tripframe.dump_series(series))
    return EXIT_OK


def _cmd_reconstruct(args, cfg):
    series, _ = _series_from_args(args, cfg)
    for alg in cfg.algorithms:
        with _stage("reconstruct"):
            cols = sample(fit(series, alg, cfg.locreg), cfg.sample_hz)
        _write(os.path.join(cfg.out_dir, f"trajectory_{alg.slug}.csv"), dump_samples(cols))
    return EXIT_OK


def _cmd_evaluate(args, cfg):
    series, trip_id = _series_from_args(args, cfg)
    events = None
    if cfg.avl:
        with _stage("avl"):
            events = ingest.load_avl_events(_read("avl", cfg.avl))
        if trip_id == "series":
            trip_id = events[0].trip_id if events else trip_id
    report, avl_failed = evaluate_stage(series, events, trip_id, cfg)
    _write(os.path.join(cfg.out_dir, "report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_VALIDATION if avl_failed else EXIT_OK


def _cmd_sample(args, cfg):
    series, _ = _series_from_args(args, cfg)
    try:
        at = np.array(_floats(args.at))
    except ValueError:
        raise StageError("sample", f"bad --at value {args.at!r}") from None
    print("algorithm,t_s,x_m,v_mps,a_mps2")
    for alg in cfg.algorithms:
        with _stage("sample"):
            traj = fit(series, alg, cfg.locreg)
            x, v, a = traj.position(at), traj.speed(at), traj.acceleration(at)
        for row in zip(at, x, v, a):
            print(alg.slug + "," + ",".join(repr(float(c)) for c in row))
    return EXIT_OK


def _cmd_simulate(args):
    if args.print_spec:
        std = simulator.standard_trip_spec()
        print(json.dumps(simulator.spec_to_json(std), indent=1))
        return EXIT_OK
    with _stage("simulate"):
        if args.spec:
            with open(args.spec, encoding="utf-8") as fh:
                doc = json.load(fh)
            if args.seed is not None:
                doc["seed"] = args.seed
            spec = simulator.spec_from_json(doc, os.path.dirname(os.path.abspath(args.spec)))
        else:
            spec = simulator.standard_trip_spec(seed=2022 if args.seed is None else args.seed)
        trip = simulator.simulate(spec)
        simulator.write_trip(trip, args.out_dir)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("TRAJ_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        cfg = build_config(args)
        if args.command == "pipeline":
            return run_pipeline(cfg)
        handler = {"match": _cmd_match, "frame": _cmd_frame, "reconstruct": _cmd_reconstruct,
                   "evaluate": _cmd_evaluate, "sample": _cmd_sample}[args.command]
        return handler(args, cfg)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
