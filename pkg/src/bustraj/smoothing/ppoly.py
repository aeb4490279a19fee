"""Piecewise cubic polynomials in local (per-piece) time."""

from __future__ import annotations

import numpy as np


class PiecewiseCubic:
    """Piecewise polynomial of degree <= 3.

    Piece ``k`` covers ``[breaks[k], breaks[k+1])`` (the last piece is closed)
    and evaluates ``c0 + c1*s + c2*s**2 + c3*s**3`` with ``s = t - breaks[k]``.

    With ``monotone=True`` evaluated values are clipped to the range of each
    piece's end values. For a piece that is monotone in exact arithmetic this
    only removes last-ulp rounding, which would otherwise show up as spurious
    decreases when sampling across a breakpoint.
    """

    def __init__(self, breaks, coeffs, monotone: bool = False):
        breaks = np.asarray(breaks, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if breaks.ndim != 1 or len(breaks) < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if coeffs.shape != (len(breaks) - 1, 4):
            raise ValueError(f"coeffs must have shape ({len(breaks) - 1}, 4), got {coeffs.shape}")
        breaks.setflags(write=False)
        coeffs.setflags(write=False)
        self.breaks = breaks
        self.coeffs = coeffs
        self.monotone = monotone
        h = np.diff(breaks)
        c = coeffs
        self._end_values = c[:, 0] + h * (c[:, 1] + h * (c[:, 2] + h * c[:, 3]))

    @property
    def n_pieces(self) -> int:
        return len(self.coeffs)

    def piece_index(self, t) -> np.ndarray:
        k = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(k, 0, self.n_pieces - 1)

    def __call__(self, t, nu: int = 0):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = self.piece_index(t)
        s = t - self.breaks[k]
        c = self.coeffs[k]
        if nu == 0:
            out = c[:, 0] + s * (c[:, 1] + s * (c[:, 2] + s * c[:, 3]))
            if self.monotone:
                lo = np.minimum(c[:, 0], self._end_values[k])
                hi = np.maximum(c[:, 0], self._end_values[k])
                out = np.clip(out, lo, hi)
        elif nu == 1:
            out = c[:, 1] + s * (2 * c[:, 2] + s * 3 * c[:, 3])
        elif nu == 2:
            out = 2 * c[:, 2] + 6 * s * c[:, 3]
        elif nu == 3:
            out = 6 * c[:, 3]
        else:
            out = np.zeros_like(s)
        return float(out[0]) if scalar else out

    def left_derivatives(self, nu: int = 1) -> np.ndarray:
        """Derivative of each piece at its right end, i.e. the left limit at ``breaks[1:]``."""
        h = np.diff(self.breaks)
        c = self.coeffs
        if nu == 1:
            return c[:, 1] + h * (2 * c[:, 2] + h * 3 * c[:, 3])
        if nu == 2:
            return 2 * c[:, 2] + 6 * h * c[:, 3]
        raise ValueError("nu must be 1 or 2")

    def right_derivatives(self, nu: int = 1) -> np.ndarray:
        """Derivative of each piece at its left end, the right limit at ``breaks[:-1]``."""
        c = self.coeffs
        if nu == 1:
            return c[:, 1].copy()
        if nu == 2:
            return 2 * c[:, 2]
        raise ValueError("nu must be 1 or 2")

    def degrees(self, rtol: float = 1e-12) -> np.ndarray:
        """Effective degree of each piece, ignoring terms negligible over the piece."""
        h = np.diff(self.breaks)
        c = self.coeffs
        contrib = np.abs(c) * h[:, None] ** np.arange(4)
        scale = np.maximum(contrib.max(axis=1), 1e-300)
        significant = contrib[:, 1:] > rtol * scale[:, None]
        deg = np.zeros(self.n_pieces, dtype=int)
        for p in (1, 2, 3):
            deg[significant[:, p - 1]] = p
        return deg
