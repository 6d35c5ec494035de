"""Two-sample asymptotic-likelihood (AL) estimator of location and scale.

Given an X-sample and a Y-sample with Y = mu + sigma X in distribution,
the estimator minimizes the quadratic form V' Omega^-1 V in the
parameter vector theta = (phi_1..phi_k, mu, sigma), where V stacks the
density-weighted quantile residuals

    W1_j = g(G^-1(t_j)) (G^-1(t_j) - mu - sigma phi_j)
    W2_j = f(F^-1(t_j)) (F^-1(t_j) - phi_j)

and Omega = blockdiag(lambda Sigma, (1 - lambda) Sigma), with
Sigma_ij = min(t_i, t_j) - t_i t_j and lambda = n / (n + m).

For fixed sigma the objective is a positive-definite quadratic in
(phi, mu), solved exactly; the remaining one-dimensional problem in
sigma is minimized by golden-section search on log sigma, and interior
minimizers are then refined to the root of the profiled slope.  The fit is
vectorized over a leading batch axis so that many independent splits
can be fitted in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import empirical
from .exceptions import FitError, ParameterDomainError
from .stable_core import StableParams, sample_stable, sigma_from_alpha

SIGMA_LOWER = 1.05
SIGMA_UPPER = 64.0
GOLDEN_TOL = 1e-6
MAX_ITER = 200
DENSITY_FLOOR = 1e-30
POLISH_ITER = 60

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TGrid:
    """Strictly increasing probabilities 0 < t_1 < ... < t_k < 1."""

    t_values: tuple

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ParameterDomainError("t-grid must be a non-empty vector")
        if np.any(t <= 0.0) or np.any(t >= 1.0) or np.any(np.diff(t) <= 0.0):
            raise ParameterDomainError(f"t-grid must be strictly increasing in (0, 1): {t}")
        object.__setattr__(self, "t_values", tuple(float(v) for v in t))

    @classmethod
    def equispaced(cls, k):
        """The grid t_j = j/(k+1), j = 1..k."""
        if k < 1:
            raise ParameterDomainError(f"k must be >= 1, got {k}")
        return cls(tuple(j / (k + 1) for j in range(1, k + 1)))

    @property
    def k(self):
        return len(self.t_values)

    @property
    def t(self):
        return np.array(self.t_values)

    @cached_property
    def sigma(self):
        return sigma_matrix(self)

    @cached_property
    def chol_inv(self):
        """Inverse of the lower Cholesky factor of Sigma."""
        chol = np.linalg.cholesky(self.sigma)
        return np.linalg.solve(chol, np.eye(self.k))


@dataclass(frozen=True)
class AlWeights:
    lambda_tilde: float
    sigma_matrix: np.ndarray
    density_x: np.ndarray
    density_y: np.ndarray
    quantile_x: np.ndarray
    quantile_y: np.ndarray


@dataclass(frozen=True)
class AlFit:
    phi: np.ndarray
    mu: float
    sigma: float
    objective: float
    converged: bool
    iterations: int

    @property
    def theta(self):
        return np.concatenate([self.phi, [self.mu, self.sigma]])


@dataclass(frozen=True)
class BatchFit:
    """Row-wise AL fits.  Rows with ``failed`` set hold NaN estimates."""

    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    objective: np.ndarray
    converged: np.ndarray
    failed: np.ndarray
    iterations: int


def sigma_matrix(grid):
    """Brownian-bridge covariance min(t_i, t_j) - t_i t_j."""
    t = grid.t
    return np.minimum.outer(t, t) - np.outer(t, t)


def al_weights(x, y, grid):
    """Plug-in quantiles and KDE densities for a pair of samples."""
    t = grid.t
    qx = empirical.equantile(x, t)
    qy = empirical.equantile(y, t)
    fx = empirical.kde_density(x, empirical.KdeSpec(empirical.default_bandwidth(x)), qx)
    gy = empirical.kde_density(y, empirical.KdeSpec(empirical.default_bandwidth(y)), qy)
    return AlWeights(
        lambda_tilde=x.n / (x.n + y.n),
        sigma_matrix=grid.sigma,
        density_x=np.atleast_1d(fx),
        density_y=np.atleast_1d(gy),
        quantile_x=np.atleast_1d(qx),
        quantile_y=np.atleast_1d(qy),
    )


def al_objective(theta, weights):
    """The quadratic form V(theta)' Omega^-1 V(theta)."""
    theta = np.asarray(theta, dtype=float)
    k = weights.quantile_x.size
    if theta.shape != (k + 2,):
        raise ParameterDomainError(f"theta must have length {k + 2}, got {theta.shape}")
    phi, mu, sigma = theta[:k], theta[k], theta[k + 1]
    w1 = weights.density_y * (weights.quantile_y - mu - sigma * phi)
    w2 = weights.density_x * (weights.quantile_x - phi)
    lam = weights.lambda_tilde
    try:
        chol = np.linalg.cholesky(weights.sigma_matrix)
    except np.linalg.LinAlgError as exc:
        raise FitError("covariance matrix is not positive definite") from exc
    e1 = np.linalg.solve(chol, w1)
    e2 = np.linalg.solve(chol, w2)
    return float(e1 @ e1 / lam + e2 @ e2 / (1.0 - lam))


class _Profile:
    """Closed-form minimization over (phi, mu) at fixed sigma, per batch row."""

    def __init__(self, qx, qy, fx, gy, lam, chol_inv):
        c1 = chol_inv[None, :, :] * gy[:, None, :] / math.sqrt(lam)
        c2 = chol_inv[None, :, :] * fx[:, None, :] / math.sqrt(1.0 - lam)
        self.m1 = np.einsum("bij,bik->bjk", c1, c1)
        self.m2 = np.einsum("bij,bik->bjk", c2, c2)
        self.c1 = self.m1.sum(axis=-1)
        self.s11 = self.c1.sum(axis=-1)
        self.r1 = np.einsum("bjk,bk->bj", self.m1, qy)
        self.r2 = np.einsum("bjk,bk->bj", self.m2, qx)
        self.ry = np.einsum("bj,bj->b", self.c1, qy)
        self.const = np.einsum("bj,bj->b", qy, self.r1) + np.einsum("bj,bj->b", qx, self.r2)
        self.qx, self.qy = qx, qy
        rows, k = qx.shape
        self._h = np.empty((rows, k + 1, k + 1))
        self._rhs = np.empty((rows, k + 1))

    def system(self, sigma):
        k = self.qx.shape[1]
        h, rhs = self._h, self._rhs
        s = sigma[:, None]
        h[:, :k, :k] = s[:, :, None] ** 2 * self.m1 + self.m2
        h[:, :k, k] = s * self.c1
        h[:, k, :k] = s * self.c1
        h[:, k, k] = self.s11
        rhs[:, :k] = s * self.r1 + self.r2
        rhs[:, k] = self.ry
        return h.copy(), rhs.copy()

    def solve(self, sigma):
        """Inner solution z = (phi, mu) and the profiled objective."""
        h, rhs = self.system(sigma)
        z = np.linalg.solve(h, rhs[:, :, None])[:, :, 0]
        return z, self.const - np.einsum("bj,bj->b", rhs, z)

    def slope(self, sigma):
        """Derivative of the profiled objective in sigma (envelope theorem)."""
        z, _ = self.solve(sigma)
        k = self.qx.shape[1]
        phi, mu = z[:, :k], z[:, k]
        w1 = self.qy - mu[:, None] - sigma[:, None] * phi
        return -2.0 * np.einsum("bj,bjk,bk->b", phi, self.m1, w1)

    def objective(self, z, sigma):
        k = self.qx.shape[1]
        phi, mu = z[:, :k], z[:, k]
        w1 = self.qy - mu[:, None] - sigma[:, None] * phi
        w2 = self.qx - phi
        return np.einsum("bj,bjk,bk->b", w1, self.m1, w1) + np.einsum("bj,bjk,bk->b", w2, self.m2, w2)


def _polish(prof, u, rows, lo, hi):
    """Refine interior minimizers to a root of the profiled slope.

    The golden-section bracket only pins log sigma to GOLDEN_TOL, and
    near-equal comparisons in a flat valley can steer it differently
    for data that differ only by rounding.  The slope root is well
    conditioned, so refining it makes the fit reproducible to far
    below the search tolerance (e.g. under affine maps of the data).
    Rows without a sign change keep the golden-section midpoint.
    """
    sub = _Profile.__new__(_Profile)
    for name in ("m1", "m2", "c1", "s11", "r1", "r2", "ry", "const", "qx", "qy"):
        setattr(sub, name, getattr(prof, name)[rows])
    n_rows, k = sub.qx.shape
    sub._h = np.empty((n_rows, k + 1, k + 1))
    sub._rhs = np.empty((n_rows, k + 1))

    def g(v):
        return sub.slope(np.exp(v))

    mid = u[rows]
    xa = np.maximum(mid - 4 * GOLDEN_TOL, lo)
    xb = np.minimum(mid + 4 * GOLDEN_TOL, hi)
    ga, gb = g(xa), g(xb)
    ok = (ga < 0) & (gb > 0)
    # Illinois variant of regula falsi, in lockstep over rows
    for _ in range(POLISH_ITER):
        active = ok & (np.abs(xb - xa) > 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xb)))
        if not active.any():
            break
        denom = np.where(active, gb - ga, 1.0)
        x = np.where(active, xb - gb * (xb - xa) / denom, xb)
        x = np.where(np.isfinite(x), x, 0.5 * (xa + xb))
        gx = g(x)
        flip = active & (np.sign(gx) != np.sign(gb))
        keep = active & ~flip
        xa, ga = np.where(flip, xb, xa), np.where(flip, gb, np.where(keep, 0.5 * ga, ga))
        xb, gb = np.where(active, x, xb), np.where(active, gx, gb)
        done = active & (gx == 0)
        xa = np.where(done, xb, xa)
    return np.where(ok, xb, mid)


def _fit_from_weights(qx, qy, fx, gy, lam, grid, failed):
    rows, k = qx.shape
    # failed rows get harmless placeholder weights and are masked at the end
    fx = np.where(failed[:, None], 1.0, fx)
    gy = np.where(failed[:, None], 1.0, gy)
    qx = np.where(failed[:, None], 0.0, qx)
    qy = np.where(failed[:, None], 0.0, qy)
    prof = _Profile(qx, qy, fx, gy, lam, grid.chol_inv)

    def f(u):
        return prof.solve(np.exp(u))[1]

    lo, hi = math.log(SIGMA_LOWER), math.log(SIGMA_UPPER)
    a = np.full(rows, lo)
    b = np.full(rows, hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    # every row starts on the same bracket and shrinks by the same factor,
    # so the bracket width is common and the loop runs in lockstep
    while (hi - lo) * _INV_PHI**iterations > GOLDEN_TOL and iterations < MAX_ITER:
        left = fc < fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        new_c = np.where(left, b - _INV_PHI * (b - a), d)
        new_d = np.where(left, c, a + _INV_PHI * (b - a))
        fnew = f(np.where(left, new_c, new_d))
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = new_c, new_d
        iterations += 1
    converged_iter = (hi - lo) * _INV_PHI**iterations <= GOLDEN_TOL
    u = 0.5 * (a + b)
    at_lower = u - lo < GOLDEN_TOL
    at_upper = hi - u < GOLDEN_TOL
    u = np.where(at_lower, lo, np.where(at_upper, hi, u))
    interior = ~at_lower & ~at_upper & ~failed
    if interior.any():
        u[interior] = _polish(prof, u, interior, lo, hi)
    sigma = np.exp(u)
    z, _ = prof.solve(sigma)
    obj = np.maximum(prof.objective(z, sigma), 0.0)
    converged = converged_iter & ~at_lower & ~at_upper & ~failed
    nan = np.where(failed, np.nan, 1.0)
    return BatchFit(
        phi=z[:, :k] * nan[:, None],
        mu=z[:, k] * nan,
        sigma=sigma * nan,
        objective=obj * nan,
        converged=converged,
        failed=failed | ~np.full(rows, converged_iter),
        iterations=iterations,
    )


def al_fit_batch(x_rows, y_rows, grid):
    """Fit each (x_rows[i], y_rows[i]) pair; rows must already be sorted.

    Rows whose bandwidth is degenerate or whose density weights fall
    below the floor are reported as failed instead of raising.
    """
    x_rows = np.atleast_2d(x_rows)
    y_rows = np.atleast_2d(y_rows)
    n, m = x_rows.shape[1], y_rows.shape[1]
    t = grid.t
    qx = empirical.batch_quantile(x_rows, t)
    qy = empirical.batch_quantile(y_rows, t)
    hx = empirical.batch_bandwidth(x_rows)
    hy = empirical.batch_bandwidth(y_rows)
    bad_bw = ~((hx > 0) & np.isfinite(hx) & (hy > 0) & np.isfinite(hy))
    hx = np.where(bad_bw, 1.0, hx)
    hy = np.where(bad_bw, 1.0, hy)
    fx = empirical.batch_kde(x_rows, hx, qx)
    gy = empirical.batch_kde(y_rows, hy, qy)
    low = (fx < DENSITY_FLOOR).any(axis=1) | (gy < DENSITY_FLOOR).any(axis=1)
    failed = bad_bw | low | ~np.isfinite(fx).all(axis=1) | ~np.isfinite(gy).all(axis=1)
    return _fit_from_weights(qx, qy, fx, gy, n / (n + m), grid, failed)


def al_fit(x, y, grid):
    """AL estimate of (phi, mu, sigma) from two :class:`SortedSample` objects."""
    if grid.k < 1:
        raise ParameterDomainError("grid must contain at least one t-value")
    w = al_weights(x, y, grid)
    if np.any(w.density_x < DENSITY_FLOOR) or np.any(w.density_y < DENSITY_FLOOR):
        raise FitError("density weight below floor at an extreme quantile")
    res = _fit_from_weights(
        w.quantile_x[None, :],
        w.quantile_y[None, :],
        w.density_x[None, :],
        w.density_y[None, :],
        w.lambda_tilde,
        grid,
        np.zeros(1, dtype=bool),
    )
    fit = AlFit(
        phi=res.phi[0],
        mu=float(res.mu[0]),
        sigma=float(res.sigma[0]),
        objective=float(res.objective[0]),
        converged=bool(res.converged[0]),
        iterations=res.iterations,
    )
    if res.failed[0]:
        raise FitError("golden-section search did not converge", best=fit)
    return fit


def profile_solution(weights, sigma, grid):
    """Closed-form (phi, mu) minimizing the objective at fixed ``sigma``."""
    prof = _Profile(
        weights.quantile_x[None, :],
        weights.quantile_y[None, :],
        weights.density_x[None, :],
        weights.density_y[None, :],
        weights.lambda_tilde,
        grid.chol_inv,
    )
    z, _ = prof.solve(np.array([float(sigma)]))
    return z[0, :-1], float(z[0, -1])


def alpha_asymptotic_variance(alpha, gamma22):
    """Delta-method variance alpha^4 Gamma22 / (log 2)^2."""
    if not 0.0 < alpha <= 2.0:
        raise ParameterDomainError(f"alpha must lie in (0, 2], got {alpha}")
    if not gamma22 > 0.0:
        raise ParameterDomainError(f"gamma22 must be positive, got {gamma22}")
    return alpha**4 * gamma22 / math.log(2.0) ** 2


@dataclass(frozen=True)
class Gamma22Estimate:
    value: float
    stderr: float
    used: int
    excluded: int


def estimate_gamma22(params, grid, n, m, reps, rng):
    """Monte-Carlo estimate of the normalized variance of sigma-hat.

    Each repetition fits an independent X-sample of size ``n`` from
    ``params`` and a Y-sample of ``m`` pair sums; the returned value is
    the empirical variance of sqrt(mn/(m+n)) (sigma_hat - sigma)/sigma.
    """
    if reps < 100:
        raise ParameterDomainError(f"reps must be >= 100, got {reps}")
    if not isinstance(params, StableParams):
        raise TypeError("params must be StableParams")
    x = np.sort(sample_stable(params, (reps, n), rng), axis=1)
    pairs = sample_stable(params, (reps, m, 2), rng)
    y = np.sort(pairs.sum(axis=2), axis=1)
    fit = al_fit_batch(x, y, grid)
    ok = ~fit.failed
    sigma = sigma_from_alpha(params.alpha)
    z = math.sqrt(m * n / (m + n)) * (fit.sigma[ok] - sigma) / sigma
    used = int(ok.sum())
    var = float(np.var(z, ddof=1))
    dev2 = (z - z.mean()) ** 2
    stderr = float(np.std(dev2, ddof=1) / math.sqrt(used))
    return Gamma22Estimate(var, stderr, used, int(reps - used))
