"""Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes)."""

from __future__ import annotations

import numpy as np

from .ppoly import PiecewiseCubic


def _edge_slope(h0, h1, s0, s1):
    # one-sided three-point estimate, then clamped so the end piece stays monotone
    m = ((2 * h0 + h1) * s0 - h0 * s1) / (h0 + h1)
    if np.sign(m) != np.sign(s0):
        return 0.0
    if np.sign(s0) != np.sign(s1) and abs(m) > abs(3 * s0):
        return 3 * s0
    return m


def pchip_slopes(t, y) -> np.ndarray:
    """Knot derivatives for a shape-preserving cubic Hermite interpolant.

    Interior knots take the weighted harmonic mean of the adjacent secants,
    ``(w1 + w2) / (w1/s_left + w2/s_right)`` with ``w1 = 2*h_right + h_left``
    and ``w2 = h_right + 2*h_left``, or 0 when the secants differ in sign or
    either vanishes.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(t)
    h = np.diff(t)
    s = np.diff(y) / h
    if n == 2:
        return np.array([s[0], s[0]])

    m = np.zeros(n)
    sl, sr = s[:-1], s[1:]
    hl, hr = h[:-1], h[1:]
    w1 = 2 * hr + hl
    w2 = hr + 2 * hl
    same = (np.sign(sl) * np.sign(sr)) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = (w1 + w2) / (w1 / sl + w2 / sr)
    m[1:-1] = np.where(same, hm, 0.0)
    m[0] = _edge_slope(h[0], h[1], s[0], s[1])
    m[-1] = _edge_slope(h[-1], h[-2], s[-1], s[-2])
    return m


def hermite_coeffs(t, y, m) -> np.ndarray:
    """Local power-basis coefficients of the cubic Hermite pieces."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    h = np.diff(t)
    s = np.diff(y) / h
    m0, m1 = m[:-1], m[1:]
    c = np.empty((len(h), 4))
    c[:, 0] = y[:-1]
    c[:, 1] = m0
    c[:, 2] = (3 * s - 2 * m0 - m1) / h
    c[:, 3] = (m0 + m1 - 2 * s) / h**2
    return c


def pchip(t, y) -> PiecewiseCubic:
    """Build the interpolant; ``y`` must be non-decreasing."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 2 or len(t) != len(y):
        raise ValueError("pchip needs at least two knots and matching lengths")
    if np.any(np.diff(t) <= 0):
        raise ValueError("knot times must be strictly increasing")
    if np.any(np.diff(y) < 0):
        raise ValueError("knot values must be non-decreasing")
    m = pchip_slopes(t, y)
    return PiecewiseCubic(t, hermite_coeffs(t, y, m), monotone=True)
