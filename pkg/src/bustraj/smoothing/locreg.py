"""Local polynomial regression with a k-nearest-neighbour tricube kernel."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

KERNELS = {
    "tricube": lambda u: (1 - u**3) ** 3,
    "epanechnikov": lambda u: 1 - u**2,
    "uniform": lambda u: np.ones_like(u),
}

RANK_RTOL = 1e-10
_CHUNK = 4096


@dataclass(frozen=True)
class LocregConfig:
    degree: int = 3
    bandwidth_points: int = 20
    kernel: str = "tricube"

    def __post_init__(self):
        if self.degree not in (0, 1, 2, 3):
            raise ValueError("degree must be between 0 and 3")
        if self.bandwidth_points < 2:
            raise ValueError("bandwidth_points must be >= 2")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {sorted(KERNELS)}")


@dataclass(frozen=True)
class LocalFit:
    """Local-polynomial value, slope and curvature at each query time."""

    value: np.ndarray
    slope: np.ndarray
    accel: np.ndarray
    degree: np.ndarray  # degree actually used per query


def bandwidths(t: np.ndarray, q: np.ndarray, k: int):
    """Kernel half-width at each query and the candidate neighbour indices.

    ``h`` is the distance to the (k+1)-th nearest knot, so the k nearest get
    positive weight. With ``n <= k`` every knot is used and ``h`` is the
    farthest distance scaled by ``(k+1)/n``.
    """
    n = len(t)
    if n <= k:
        idx = np.broadcast_to(np.arange(n), (len(q), n))
        dist = np.abs(t[None, :] - q[:, None])
        h = dist.max(axis=1) * (k + 1) / n
        return h, idx, dist
    pos = np.searchsorted(t, q)
    offsets = np.arange(-(k + 1), k + 1)
    idx = pos[:, None] + offsets[None, :]
    inside = (idx >= 0) & (idx < n)
    idx = np.clip(idx, 0, n - 1)
    dist = np.where(inside, np.abs(t[idx] - q[:, None]), np.inf)
    h = np.partition(dist, k, axis=1)[:, k]
    return h, idx, dist


def _solve(A, b):
    """Batched least squares via SVD; returns coefficients and a rank-ok mask."""
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    ok = S[:, -1] > RANK_RTOL * S[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(S > RANK_RTOL * S[:, :1], 1.0 / S, 0.0)
    coef = np.einsum("mji,mj,mkj,mk->mi", Vt, inv, U, b)
    return coef, ok


def local_fit(t, d, q, config: LocregConfig = LocregConfig()) -> LocalFit:
    """Weighted least-squares polynomial fit centred on each query time.

    Weights are ``K(|t_j - q| / h)`` for ``|t_j - q| < h``, zero otherwise.
    A query whose weighted design is rank deficient falls back to lower
    degrees (3 -> 2 -> 1 -> 0).
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    kernel = KERNELS[config.kernel]
    k = config.bandwidth_points

    value = np.empty(len(q))
    slope = np.empty(len(q))
    accel = np.empty(len(q))
    used = np.empty(len(q), dtype=int)

    for lo in range(0, len(q), _CHUNK):
        qc = q[lo:lo + _CHUNK]
        h, idx, dist = bandwidths(t, qc, k)
        u = np.where(np.isfinite(dist), dist / h[:, None], 1.0)
        w = np.where(u < 1, kernel(np.minimum(u, 1.0)), 0.0)
        sw = np.sqrt(w)
        z = (t[idx] - qc[:, None]) / h[:, None]  # signed, scaled local time
        b = sw * d[idx]

        pending = np.arange(len(qc))
        beta = np.zeros((len(qc), 4))
        deg_used = np.zeros(len(qc), dtype=int)
        for deg in range(config.degree, -1, -1):
            if not len(pending):
                break
            A = sw[pending, :, None] * z[pending, :, None] ** np.arange(deg + 1)
            coef, ok = _solve(A, b[pending])
            done = pending[ok] if deg > 0 else pending
            beta[done, :deg + 1] = coef[ok] if deg > 0 else coef
            deg_used[done] = deg
            pending = pending[~ok] if deg > 0 else pending[:0]

        value[lo:lo + len(qc)] = beta[:, 0]
        slope[lo:lo + len(qc)] = beta[:, 1] / h
        accel[lo:lo + len(qc)] = 2 * beta[:, 2] / h**2
        used[lo:lo + len(qc)] = deg_used

    fit = LocalFit(value, slope, accel, used)
    n_low = int(np.count_nonzero(used < config.degree))
    if n_low:
        log.warning("local fit degraded below degree %d at %d of %d queries", config.degree, n_low, len(q))
    return fit
