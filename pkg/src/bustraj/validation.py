"""Score trajectories against door-open records and acceleration bounds.

Speeds are compared in m/s after converting the mph thresholds exactly
(1 mph = 0.44704 m/s); the same factor converts mphps bounds to m/s^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ingest import AvlDoorEvent
from .smoothing import Algorithm, LocregConfig, Trajectory, fit
from .tripframe import TimeDistanceSeries
from .units import MPS2_PER_MPHPS, MPS_PER_MPH

DEFAULT_THRESHOLDS_MPH = (0.0, 3.0, 5.0)
DEFAULT_ACCEL_BOUNDS_MPHPS = (-5.3, 3.7)
SCORE_THRESHOLD_MPH = 5.0
DENSE_HZ = 10.0
DERIV_RTOL = 1e-9
FD_STEP = 1e-3
FD_RTOL = 1e-4


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SpeedValidationReport:
    threshold_mph: tuple[float, ...]
    captured_pct: tuple[float, ...]
    total_dooropen_seconds: int

    def at(self, threshold_mph: float) -> float:
        return self.captured_pct[self.threshold_mph.index(threshold_mph)]


@dataclass(frozen=True)
class AccelValidationReport:
    max_accel_mphps: float
    max_decel_mphps: float
    unreasonable_pct: float
    samples: int


def dooropen_seconds(events: Sequence[AvlDoorEvent], origin_time: int, t_end: float) -> np.ndarray:
    """Integer seconds into trip covered by any door-open interval, both ends inclusive."""
    secs: set[int] = set()
    for ev in events:
        lo = max(ev.open_at - origin_time, 0)
        hi = min(ev.close_at - origin_time, int(np.floor(t_end)))
        secs.update(range(lo, hi + 1))
    return np.array(sorted(secs), dtype=float)


def validate_speed(traj: Trajectory, events: Sequence[AvlDoorEvent],
                   thresholds_mph: Sequence[float] = DEFAULT_THRESHOLDS_MPH) -> SpeedValidationReport:
    """Share of door-open seconds at which the trajectory speed is at or below each threshold.

    Event instants are converted to seconds into trip with the trajectory's
    ``origin_time``.
    """
    secs = dooropen_seconds(events, traj.origin_time, traj.domain[1])
    if not len(secs):
        raise ValidationError("no AVL overlap: no door-open seconds inside the trajectory domain")
    v = np.asarray(traj.speed(secs))
    thresholds = tuple(float(x) for x in thresholds_mph)
    pct = tuple(100.0 * np.count_nonzero(v <= th * MPS_PER_MPH) / len(secs) for th in thresholds)
    return SpeedValidationReport(thresholds, pct, len(secs))


def sample_times(t_end: float, hz: float) -> np.ndarray:
    steps = int(np.floor(t_end * hz + 1e-9))
    return np.minimum(np.arange(steps + 1) / hz, t_end)


def validate_accel(traj: Trajectory, bounds_mphps=DEFAULT_ACCEL_BOUNDS_MPHPS,
                   sample_hz: float = 1.0) -> AccelValidationReport:
    """Share of uniformly sampled accelerations outside ``bounds_mphps``."""
    if not sample_hz > 0:
        raise ValidationError("sample_hz must be positive")
    lo, hi = bounds_mphps
    t = sample_times(traj.domain[1], sample_hz)
    a = np.asarray(traj.acceleration(t))
    bad = (a < lo * MPS2_PER_MPHPS) | (a > hi * MPS2_PER_MPHPS)
    return AccelValidationReport(hi, lo, 100.0 * np.count_nonzero(bad) / len(t), len(t))


# -- ideal-trajectory property checks -----------------------------------------


def is_monotone(traj: Trajectory, hz: float = DENSE_HZ) -> bool:
    """Non-decreasing under dense sampling (knot times included)."""
    t = np.union1d(sample_times(traj.domain[1], hz), traj.knots_t)
    x = np.asarray(traj.position(t))
    return bool(np.all(np.diff(x) >= 0))


def is_cubic(traj: Trajectory) -> bool:
    """Composite of polynomial pieces, none above cubic, at least one above linear."""
    if traj.pieces is None:
        return False
    deg = traj.pieces.degrees()
    return bool(deg.max() <= 3 and deg.max() > 1)


def knot_derivative_gaps(traj: Trajectory) -> np.ndarray:
    """Relative left/right first-derivative mismatch at each interior knot."""
    pp = traj.pieces
    left = pp.left_derivatives()[:-1]
    right = pp.right_derivatives()[1:]
    scale = np.maximum(np.maximum(np.abs(left), np.abs(right)), 1.0)
    return np.abs(left - right) / scale


def is_differentiable(traj: Trajectory) -> bool:
    """Once differentiable with the reported speed as its derivative.

    Piecewise trajectories compare one-sided derivatives at interior knots.
    Trajectories without a piecewise form are checked by comparing the
    reported speed with a central difference of position at the knots.
    """
    if traj.pieces is not None:
        if traj.pieces.n_pieces < 2:
            return True
        return bool(np.all(knot_derivative_gaps(traj) <= DERIV_RTOL))
    t_end = traj.domain[1]
    t = traj.knots_t[(traj.knots_t > FD_STEP) & (traj.knots_t < t_end - FD_STEP)]
    fd = (np.asarray(traj.position(t + FD_STEP)) - np.asarray(traj.position(t - FD_STEP))) / (2 * FD_STEP)
    v = np.asarray(traj.speed(t))
    scale = np.maximum(np.abs(v), 1.0)
    return bool(np.all(np.abs(fd - v) <= FD_RTOL * scale))


# -- scorecard ----------------------------------------------------------------


@dataclass
class ScoreRow:
    algorithm: Algorithm
    mon: bool
    cub: bool
    diff: bool
    err: bool
    avl_pct: Optional[dict[float, float]]
    acc_unreasonable_pct: float
    best: bool = False

    @property
    def acc_pct(self) -> float:
        return 100.0 - self.acc_unreasonable_pct

    def to_json(self) -> dict:
        return {
            "name": self.algorithm.slug,
            "mon": self.mon,
            "cub": self.cub,
            "diff": self.diff,
            "err": self.err,
            "avl_pct": None if self.avl_pct is None else {f"{k:g}": v for k, v in self.avl_pct.items()},
            "acc_pct": self.acc_pct,
            "acc_unreasonable_pct": self.acc_unreasonable_pct,
            "best": self.best,
        }


@dataclass
class Scorecard:
    rows: list[ScoreRow] = field(default_factory=list)

    def row(self, algorithm) -> ScoreRow:
        algorithm = Algorithm.parse(algorithm) if isinstance(algorithm, str) else algorithm
        for r in self.rows:
            if r.algorithm is algorithm:
                return r
        raise KeyError(algorithm)

    @property
    def best(self) -> Optional[Algorithm]:
        for r in self.rows:
            if r.best:
                return r.algorithm
        return None

    def to_json(self, trip_id: str = "") -> dict:
        return {"trip_id": trip_id, "algorithms": [r.to_json() for r in self.rows]}


def score_trajectory(traj: Trajectory, events: Sequence[AvlDoorEvent],
                     thresholds_mph=DEFAULT_THRESHOLDS_MPH, bounds_mphps=DEFAULT_ACCEL_BOUNDS_MPHPS,
                     accel_hz: float = 1.0) -> ScoreRow:
    avl = None
    if events:
        rep = validate_speed(traj, events, thresholds_mph)
        avl = dict(zip(rep.threshold_mph, rep.captured_pct))
    acc = validate_accel(traj, bounds_mphps, accel_hz)
    return ScoreRow(
        algorithm=traj.algorithm,
        mon=is_monotone(traj),
        cub=is_cubic(traj),
        diff=is_differentiable(traj),
        err=traj.algorithm.models_error,
        avl_pct=avl,
        acc_unreasonable_pct=acc.unreasonable_pct,
    )


def build_scorecard(series: TimeDistanceSeries, events: Sequence[AvlDoorEvent] = (),
                    config: Optional[LocregConfig] = None, algorithms: Sequence[Algorithm] = tuple(Algorithm),
                    thresholds_mph=DEFAULT_THRESHOLDS_MPH, bounds_mphps=DEFAULT_ACCEL_BOUNDS_MPHPS,
                    accel_hz: float = 1.0) -> Scorecard:
    """Fit each algorithm and measure the ideal-trajectory flags and validation figures.

    An algorithm is marked best when it passes all four of MON, CUB, DIFF
    and ERR; ties go to the higher share of door-open seconds captured at
    5 mph, then to the lower share of implausible accelerations.
    """
    rows = [score_trajectory(fit(series, alg, config), events, thresholds_mph, bounds_mphps, accel_hz) for alg in algorithms]
    ideal = [r for r in rows if r.mon and r.cub and r.diff and r.err]
    if ideal:
        def rank(r):
            avl = (r.avl_pct or {}).get(SCORE_THRESHOLD_MPH, 0.0)
            return (-avl, r.acc_unreasonable_pct)
        min(ideal, key=rank).best = True
    return Scorecard(rows)
