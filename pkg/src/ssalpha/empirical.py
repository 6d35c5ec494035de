"""Interpolated empirical distribution/quantile functions and Gaussian KDE.

The empirical distribution function puts the j-th order statistic
(1-based) at height (j - 1)/(n - 1) and interpolates linearly between
knots; it is 0 left of the minimum and 1 right of the maximum.  Its
inverse is therefore the "type 7" sample quantile.

Row-wise ``batch_*`` helpers operate on 2-D arrays whose rows are
sorted samples; the split-sample estimator uses them to process all
of its splits at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSampleError, ParameterDomainError

TIE_JITTER = 1e-9
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _type7(sorted_values, t):
    n = sorted_values.shape[-1]
    h = (n - 1) * np.asarray(t, dtype=float)
    lo = np.clip(np.floor(h).astype(int), 0, n - 2)
    frac = h - lo
    left = sorted_values[..., lo]
    right = sorted_values[..., lo + 1]
    return left + frac * (right - left)


def _iqr_sorted(sorted_values):
    q = _type7(sorted_values, np.array([0.25, 0.75]))
    return q[..., 1] - q[..., 0]


def resolve_ties(sorted_values, rng):
    """Jitter duplicated values of a sorted 1-D array until strictly increasing.

    The jitter is uniform with magnitude 1e-9 times the sample IQR, so
    it scales with the data.
    """
    x = np.array(sorted_values, dtype=float)
    if x.size < 2 or np.all(np.diff(x) > 0):
        return x
    scale = _iqr_sorted(x)
    if not scale > 0:
        scale = x[-1] - x[0]
    if not scale > 0:
        scale = max(abs(x[0]), 1.0)
    for _ in range(50):
        dup = np.zeros(x.size, dtype=bool)
        dup[1:] = np.diff(x) <= 0
        if not dup.any():
            return x
        x[dup] += rng.uniform(-TIE_JITTER, TIE_JITTER, dup.sum()) * scale
        x.sort()
    raise DegenerateSampleError("could not separate tied values")


class SortedSample:
    """An ascending sample with interpolated EDF and quantile accessors.

    Ties are broken by a tiny jitter drawn from ``rng``; without an
    ``rng`` a fixed-seed generator is used so construction stays
    deterministic.
    """

    def __init__(self, values, rng=None):
        x = np.sort(np.asarray(values, dtype=float).ravel())
        if x.size < 2:
            raise DegenerateSampleError("a sample needs at least two values")
        if not np.all(np.isfinite(x)):
            raise DegenerateSampleError("sample contains non-finite values")
        if rng is None:
            rng = np.random.default_rng(0)
        # jitter cannot create real spread; remember whether there was any
        self._zero_iqr = not _iqr_sorted(x) > 0
        x = resolve_ties(x, rng)
        x.flags.writeable = False
        self._values = x

    @property
    def values(self):
        return self._values

    @property
    def n(self):
        return self._values.size

    def __len__(self):
        return self._values.size

    def knots(self):
        """Interpolation knots ``(values, heights)``."""
        return self._values, np.arange(self.n) / (self.n - 1)


@dataclass(frozen=True)
class KdeSpec:
    """Gaussian kernel with a fixed bandwidth (data units)."""

    bandwidth: float

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ParameterDomainError(f"bandwidth must be positive, got {self.bandwidth}")


def edf(sample, x):
    """Interpolated empirical distribution function at ``x``."""
    xs, heights = sample.knots()
    out = np.interp(x, xs, heights, left=0.0, right=1.0)
    return float(out) if np.ndim(out) == 0 else out


def equantile(sample, t):
    """Inverse of :func:`edf` on (0, 1)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr <= 0.0) | (t_arr >= 1.0)):
        raise ParameterDomainError(f"t must lie in (0, 1), got {t}")
    out = _type7(sample.values, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def kde_density(sample, spec, x):
    """Gaussian kernel density estimate at ``x`` (scalar or array)."""
    x_arr = np.asarray(x, dtype=float)
    h = spec.bandwidth
    u = (x_arr[..., None] - sample.values) / h
    out = np.exp(-0.5 * u * u).sum(axis=-1) * INV_SQRT_2PI / (sample.n * h)
    return float(out) if np.ndim(out) == 0 else out


def default_bandwidth(sample):
    """Robust Silverman bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5)."""
    h = batch_bandwidth(sample.values[None, :])[0]
    if sample._zero_iqr or not (h > 0 and math.isfinite(h)):
        raise DegenerateSampleError("sample has zero spread")
    return float(h)


# -- row-wise versions used by the batched fit ------------------------------


def batch_quantile(sorted_rows, t):
    """Type-7 quantiles of each row at probabilities ``t``; shape (rows, len(t))."""
    return _type7(sorted_rows, np.asarray(t, dtype=float))


def batch_bandwidth(sorted_rows):
    """Robust Silverman bandwidth per row; non-positive entries mark degenerate rows."""
    n = sorted_rows.shape[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        sd = np.std(sorted_rows, axis=-1, ddof=1)
    iqr = _iqr_sorted(sorted_rows) / 1.34
    spread = np.where(np.isfinite(sd), np.minimum(sd, iqr), iqr)
    return 0.9 * spread * n ** (-0.2)


def batch_kde(sorted_rows, bandwidth, points):
    """Gaussian KDE of each row at that row's ``points``; shape (rows, k)."""
    n = sorted_rows.shape[-1]
    h = bandwidth[:, None, None]
    u = (points[:, :, None] - sorted_rows[:, None, :]) / h
    dens = np.exp(-0.5 * u * u).sum(axis=-1)
    return dens * INV_SQRT_2PI / (n * bandwidth[:, None])
