"""Trajectory models fitted to a time-distance series.

Four models are provided:

* ``LSEG``: straight lines between observations. Speed and acceleration are
  forward differences, so ``v`` is piecewise constant and ``a`` is the
  forward difference of those constants.
* ``PCHIP``: monotone cubic Hermite interpolation of the observations.
* ``LOCREG``: local cubic regression. It treats each observation as noisy,
  but the resulting curve is not guaranteed to be monotone.
* ``LOCREG_PCHIP``: local regression estimates at the observation times,
  forced non-decreasing by carrying the running maximum forward, then
  interpolated with PCHIP.

Trajectories are defined on ``[0, t_n]`` only; evaluating outside raises.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Optional

import numpy as np

from ..tripframe import TimeDistanceSeries
from .locreg import LocregConfig, local_fit
from .pchip import pchip
from .ppoly import PiecewiseCubic


class Algorithm(str, enum.Enum):
    LSEG = "LSEG"
    PCHIP = "PCHIP"
    LOCREG = "LOCREG"
    LOCREG_PCHIP = "LOCREG_PCHIP"

    @property
    def slug(self) -> str:
        return self.value.lower().replace("_", "-")

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown algorithm {name!r}") from None

    @property
    def models_error(self) -> bool:
        return self in (Algorithm.LOCREG, Algorithm.LOCREG_PCHIP)


class DomainError(ValueError):
    pass


class Trajectory:
    """Continuous distance function ``x(t)`` with speed and acceleration.

    ``pieces`` is the piecewise-polynomial representation when one exists
    (every algorithm except LOCREG). ``knots_x`` holds the fitted distances
    at the observation times.
    """

    def __init__(self, algorithm: Algorithm, knots_t, knots_x, pieces: Optional[PiecewiseCubic],
                 warnings=(), metadata=None, origin_time: int = 0):
        self.algorithm = algorithm
        self.origin_time = origin_time
        self.knots_t = np.asarray(knots_t, dtype=float)
        self.knots_x = np.asarray(knots_x, dtype=float)
        self.knots_t.setflags(write=False)
        self.knots_x.setflags(write=False)
        self.pieces = pieces
        self.warnings = tuple(warnings)
        self.metadata = dict(metadata or {})

    @property
    def domain(self) -> tuple[float, float]:
        return 0.0, float(self.knots_t[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi) or np.any(~np.isfinite(t)):
            raise DomainError(f"t outside trajectory domain [{lo}, {hi}]")
        return t

    def position(self, t):
        return self.pieces(self._check(t))

    def speed(self, t):
        return self.pieces(self._check(t), 1)

    def acceleration(self, t):
        return self.pieces(self._check(t), 2)

    def __repr__(self):
        return f"<Trajectory {self.algorithm.value} n={len(self.knots_t)} domain={self.domain}>"


class LinearTrajectory(Trajectory):
    def __init__(self, knots_t, knots_x, origin_time: int = 0):
        t = np.asarray(knots_t, dtype=float)
        x = np.asarray(knots_x, dtype=float)
        h = np.diff(t)
        v = np.diff(x) / h
        coeffs = np.zeros((len(h), 4))
        coeffs[:, 0] = x[:-1]
        coeffs[:, 1] = v
        super().__init__(Algorithm.LSEG, t, x, PiecewiseCubic(t, coeffs, monotone=True),
                         origin_time=origin_time)
        acc = np.zeros((len(h), 4))
        acc[:-1, 0] = np.diff(v) / h[:-1]  # last interval has no next speed
        self._accel = PiecewiseCubic(t, acc)

    def acceleration(self, t):
        return self._accel(self._check(t))


class LocalRegressionTrajectory(Trajectory):
    """LOCREG evaluated anywhere in the domain by refitting at the query time.

    ``v`` and ``a`` are the first and second derivatives of the local
    polynomial at its centre, not derivatives of ``x(t)`` as a function.
    """

    def __init__(self, series: TimeDistanceSeries, config: LocregConfig, knots_x, warnings=()):
        super().__init__(Algorithm.LOCREG, series.t, knots_x, None, warnings,
                         metadata={"continuous_evaluation": "refit-per-query"},
                         origin_time=series.origin_time)
        self._t = series.t
        self._d = series.d
        self.config = config

    def _fit(self, t):
        scalar = np.ndim(t) == 0
        fit = local_fit(self._t, self._d, self._check(t), self.config)
        return fit, scalar

    def position(self, t):
        fit, scalar = self._fit(t)
        return float(fit.value[0]) if scalar else fit.value

    def speed(self, t):
        fit, scalar = self._fit(t)
        return float(fit.slope[0]) if scalar else fit.slope

    def acceleration(self, t):
        fit, scalar = self._fit(t)
        return float(fit.accel[0]) if scalar else fit.accel


class SmoothedDistances:
    """Estimated true distances at the observation times."""

    def __init__(self, x, d):
        self.x = np.asarray(x, dtype=float)
        self.x.setflags(write=False)
        self.residuals = self.x - np.asarray(d, dtype=float)

    def __len__(self):
        return len(self.x)


def fit_lseg(series: TimeDistanceSeries) -> Trajectory:
    return LinearTrajectory(series.t, series.d, series.origin_time)


def fit_pchip(series: TimeDistanceSeries) -> Trajectory:
    return Trajectory(Algorithm.PCHIP, series.t, series.d, pchip(series.t, series.d),
                      origin_time=series.origin_time)


def fit_locreg(series: TimeDistanceSeries, config: Optional[LocregConfig] = None):
    """Local regression; returns ``(SmoothedDistances, Trajectory)``."""
    config = config or LocregConfig()
    if series.n <= config.degree + 1:
        raise ValueError(f"need more than {config.degree + 1} points for a degree-{config.degree} fit")
    fit = local_fit(series.t, series.d, series.t, config)
    warnings = []
    n_low = int(np.count_nonzero(fit.degree < config.degree))
    if n_low:
        warnings.append(f"degree reduced at {n_low} knots (rank-deficient neighbourhood)")
    smoothed = SmoothedDistances(fit.value, series.d)
    return smoothed, LocalRegressionTrajectory(series, config, fit.value, warnings)


def running_max_clamp(x) -> np.ndarray:
    """Replace every value smaller than its predecessor by the predecessor."""
    out = np.array(x, dtype=float)
    for i in range(1, len(out)):
        if out[i] < out[i - 1]:
            out[i] = out[i - 1]
    return out


def fit_locreg_pchip(series: TimeDistanceSeries, config: Optional[LocregConfig] = None) -> Trajectory:
    if series.n <= 2:
        raise ValueError("LOCREG-PCHIP needs more than 2 points")
    config = config or LocregConfig()
    if series.n <= config.degree + 1:
        # short series: drop to the highest degree the points support
        config = dataclasses.replace(config, degree=series.n - 2)
    smoothed, loc = fit_locreg(series, config)
    x = running_max_clamp(smoothed.x)
    n_clamped = int(np.count_nonzero(x != smoothed.x))
    return Trajectory(Algorithm.LOCREG_PCHIP, series.t, x, pchip(series.t, x), loc.warnings,
                      metadata={"clamped_knots": n_clamped, "locreg_x": smoothed.x},
                      origin_time=series.origin_time)


def fit(series: TimeDistanceSeries, algorithm, config: Optional[LocregConfig] = None) -> Trajectory:
    algorithm = Algorithm.parse(algorithm) if isinstance(algorithm, str) else algorithm
    if algorithm is Algorithm.LSEG:
        return fit_lseg(series)
    if algorithm is Algorithm.PCHIP:
        return fit_pchip(series)
    if algorithm is Algorithm.LOCREG:
        return fit_locreg(series, config)[1]
    return fit_locreg_pchip(series, config)


def eval_x(traj: Trajectory, t):
    return traj.position(t)


def eval_v(traj: Trajectory, t):
    return traj.speed(t)


def eval_a(traj: Trajectory, t):
    return traj.acceleration(t)


def sample(traj: Trajectory, hz: float) -> dict[str, np.ndarray]:
    """Uniform samples of t, x, v, a over the whole domain (endpoint included)."""
    if not hz > 0:
        raise ValueError("sample rate must be positive")
    t_end = traj.domain[1]
    steps = int(np.floor(t_end * hz + 1e-9))
    t = np.minimum(np.arange(steps + 1) / hz, t_end)
    if t[-1] < t_end:
        t = np.append(t, t_end)
    return {"t_s": t, "x_m": np.asarray(traj.position(t)), "v_mps": np.asarray(traj.speed(t)),
            "a_mps2": np.asarray(traj.acceleration(t))}
