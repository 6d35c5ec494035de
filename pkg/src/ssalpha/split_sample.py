"""Split-sample estimation of the stability index.

A sample of n + 2m observations is permuted; the first n values form
the X-sample and consecutive pairs of the remaining 2m values are
summed to form the Y-sample.  Since X + X' = mu + sigma X in
distribution with sigma = 2**(1/alpha), an AL fit of sigma on the
two samples yields an index estimate.  Repeating over B random
permutations and combining gives three estimators:

* ``alpha1``: truncated index of the mean sigma-hat,
* ``alpha2``: mean of the per-split truncated indices,
* ``alpha3``: median of the per-split truncated indices.

Permutations for split b are drawn from their own generator seeded
with ``(seed, b)``, so each split is reproducible on its own and the
result does not depend on the order in which splits are fitted.
Tied data values are separated once, before splitting, with the
stream ``(seed, 2**32 - 1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .al_estimator import TGrid, al_fit_batch
from .empirical import resolve_ties
from .exceptions import EstimationError, ParameterDomainError
from .stable_core import alpha_from_sigma, alpha_from_sigma_array

DEFAULT_B = 250
DEFAULT_K = 9
# stream id for tie breaking; split ids are 0..B-1 so this never collides
TIE_STREAM = 2**32 - 1


@dataclass(frozen=True)
class SplitConfig:
    """Sizes and seed controlling the split-sample procedure."""

    n: int
    m: int
    b_splits: int = DEFAULT_B
    grid: TGrid = field(default_factory=lambda: TGrid.equispaced(DEFAULT_K))
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 2:
            raise ParameterDomainError(f"need n >= 2 and m >= 2, got n={self.n}, m={self.m}")
        if self.b_splits < 1:
            raise ParameterDomainError(f"B must be >= 1, got {self.b_splits}")

    @classmethod
    def for_size(cls, total, **kwargs):
        """Config with m = n, taking n + 2m = ``total`` (which must be divisible by 3)."""
        if total % 3:
            raise ParameterDomainError(f"n + 2m with m = n needs a multiple of 3, got {total}")
        return cls(n=total // 3, m=total // 3, **kwargs)

    @property
    def total(self):
        return self.n + 2 * self.m


@dataclass(frozen=True)
class SplitEstimate:
    sigma_hats: np.ndarray
    alpha_hats: np.ndarray
    failures: int
    alpha1: float
    alpha2: float
    alpha3: float

    @property
    def b_splits(self):
        return self.sigma_hats.size

    @property
    def unreliable(self):
        return self.failures > 0.5 * self.b_splits

    @property
    def sigma_bar(self):
        return float(np.nanmean(self.sigma_hats))


def split_once(data, permutation, n, m):
    """X-sample and pair-sum Y-sample for one permutation of ``data``."""
    data = np.asarray(data, dtype=float)
    perm = np.asarray(permutation)
    if data.shape != (n + 2 * m,):
        raise ParameterDomainError(f"data must have length n + 2m = {n + 2 * m}, got {data.shape}")
    if perm.shape != data.shape or not np.array_equal(np.sort(perm), np.arange(data.size)):
        raise ParameterDomainError("permutation must be a bijection on the data indices")
    shuffled = data[perm]
    return shuffled[:n].copy(), shuffled[n:].reshape(m, 2).sum(axis=1)


def split_permutations(config):
    """The B permutations used by :func:`sse_estimate`, one row per split."""
    size = config.total
    return np.stack(
        [np.random.default_rng([config.seed, b]).permutation(size) for b in range(config.b_splits)]
    )


def _split_rows(data, perms, n, m):
    shuffled = data[perms]
    x = np.sort(shuffled[:, :n], axis=1)
    y = np.sort(shuffled[:, n:].reshape(len(perms), m, 2).sum(axis=2), axis=1)
    return x, y


def combine(sigma_hats):
    """The three combiners over successful splits; NaN marks a failed split."""
    sigma_hats = np.asarray(sigma_hats, dtype=float)
    ok = np.isfinite(sigma_hats)
    if not ok.any():
        raise EstimationError("all splits failed")
    alpha_hats = alpha_from_sigma_array(sigma_hats)
    good = alpha_hats[ok]
    return SplitEstimate(
        sigma_hats=sigma_hats,
        alpha_hats=alpha_hats,
        failures=int((~ok).sum()),
        alpha1=alpha_from_sigma(float(sigma_hats[ok].mean())),
        alpha2=float(good.mean()),
        alpha3=float(np.median(good)),
    )


def sse_estimate(data, config):
    """Split-sample estimate of alpha from ``data`` of length n + 2m."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size != config.total:
        raise ParameterDomainError(
            f"data length {data.size} does not match n + 2m = {config.total}"
        )
    if not np.all(np.isfinite(data)):
        raise ParameterDomainError("data contains non-finite values")
    if np.unique(data).size < data.size:
        # ties are floating-point artifacts for a continuous law; separate them
        order = np.argsort(data, kind="stable")
        data = data.copy()
        data[order] = resolve_ties(data[order], np.random.default_rng([config.seed, TIE_STREAM]))
    perms = split_permutations(config)
    x, y = _split_rows(data, perms, config.n, config.m)
    fit = al_fit_batch(x, y, config.grid)
    est = combine(np.where(fit.failed, np.nan, fit.sigma))
    if est.unreliable:
        warnings.warn(
            f"{est.failures} of {est.b_splits} AL fits failed; estimate is unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    return est


def boundary_rate(estimate):
    """Fractions of successful per-split estimates equal to 0 and to 2."""
    a = np.asarray(estimate.alpha_hats if hasattr(estimate, "alpha_hats") else estimate, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        raise EstimationError("no successful splits")
    return float(np.mean(a == 0.0)), float(np.mean(a == 2.0))


def permutation_count(n, m):
    """Exact number of distinct (X, Y) constructions, C(n+2m, n) prod C(2m-2i, 2)."""
    if n < 0 or m < 1:
        raise ParameterDomainError(f"need n >= 0 and m >= 1, got n={n}, m={m}")
    count = math.comb(n + 2 * m, n)
    for i in range(m):
        count *= math.comb(2 * m - 2 * i, 2)
    return count
