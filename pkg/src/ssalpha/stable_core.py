"""Stable distributions S(alpha, beta, gamma, delta).

The parameterization is the continuous one: for alpha != 1 the
characteristic function is

    exp(-gamma^a |t|^a [1 + i beta tan(pi a / 2) sign(t) (|gamma t|^(1-a) - 1)]
        + i delta t)

and for alpha == 1

    exp(-gamma |t| [1 + i beta (2/pi) sign(t) log(gamma |t|)] + i delta t).

Variates are generated with the Chambers-Mallows-Stuck transform, which
produces a standard variate ``Z`` in the classical (discontinuous at
alpha = 1) parameterization.  The conversion to the continuous form is a
pure location shift:

    X = gamma * (Z - beta * tan(pi alpha / 2)) + delta     (alpha != 1)
    X = gamma * Z + delta                                   (alpha == 1)

The alpha == 1 line holds because ``gamma * Z`` already carries the
``log(gamma |t|)`` term of the continuous form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterDomainError

ALPHA_ONE_TOL = 1e-8
SQRT2 = math.sqrt(2.0)


def _is_alpha_one(alpha):
    return abs(alpha - 1.0) < ALPHA_ONE_TOL


def _tan_term(alpha):
    # tan(pi) is ~1e-16, not 0; the skewness term must vanish at alpha = 2
    if alpha == 2.0:
        return 0.0
    return math.tan(math.pi * alpha / 2.0)


@dataclass(frozen=True)
class StableParams:
    """Parameters of a stable law.

    Parameters
    ----------
    alpha : float
        Stability index in (0, 2].
    beta : float
        Skewness in [-1, 1].
    gamma : float
        Scale, > 0.
    delta : float
        Location.
    """

    alpha: float
    beta: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.delta)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterDomainError(f"non-finite stable parameters {vals}")
        if not 0.0 < self.alpha <= 2.0:
            raise ParameterDomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not -1.0 <= self.beta <= 1.0:
            raise ParameterDomainError(f"beta must lie in [-1, 1], got {self.beta}")
        if self.gamma <= 0.0:
            raise ParameterDomainError(f"gamma must be positive, got {self.gamma}")

    def replace(self, **changes):
        fields = dict(alpha=self.alpha, beta=self.beta, gamma=self.gamma, delta=self.delta)
        fields.update(changes)
        return StableParams(**fields)


@dataclass(frozen=True)
class ScaleAlphaPair:
    """A scale ratio together with its truncated index."""

    sigma: float
    alpha_hat: float

    @classmethod
    def from_sigma(cls, sigma):
        return cls(float(sigma), alpha_from_sigma(sigma))


def char_function(params, t):
    """Characteristic function of ``params`` evaluated at ``t``.

    ``t`` may be a scalar or an array; the result has matching shape.
    """
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ParameterDomainError("t must be finite")
    abst = np.abs(t)
    sgn = np.sign(t)
    if _is_alpha_one(a):
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = np.where(abst > 0, np.log(g * np.where(abst > 0, abst, 1.0)), 0.0)
        expo = -g * abst * (1.0 + 1j * b * (2.0 / math.pi) * sgn * logterm)
    else:
        # gamma^a |t|^a (|gamma t|^(1-a) - 1) rewritten as gamma|t| - (gamma|t|)^a,
        # which stays finite at t = 0 for every alpha
        gt = g * abst
        gta = gt**a
        expo = -gta - 1j * b * _tan_term(a) * sgn * (gt - gta)
    out = np.exp(expo + 1j * d * t)
    if out.ndim == 0:
        return complex(out)
    return out


def sigma_from_alpha(alpha):
    """Scale ratio 2**(1/alpha) linking X + X' to X."""
    if not 0.0 < alpha <= 2.0:
        raise ParameterDomainError(f"alpha must lie in (0, 2], got {alpha}")
    return 2.0 ** (1.0 / alpha)


def alpha_from_sigma(sigma):
    """Truncated index estimate from a scale ratio.

    0 on (0, 1), 2 on [1, sqrt 2), log 2 / log sigma beyond.
    """
    if not sigma > 0.0:
        raise ParameterDomainError(f"sigma must be positive, got {sigma}")
    if sigma < 1.0:
        return 0.0
    if sigma < SQRT2:
        return 2.0
    return min(math.log(2.0) / math.log(sigma), 2.0)


def alpha_from_sigma_array(sigma):
    """Vectorized :func:`alpha_from_sigma`; NaN entries pass through."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma[np.isfinite(sigma)] <= 0.0):
        raise ParameterDomainError("sigma must be positive")
    out = np.full(sigma.shape, np.nan)
    ok = np.isfinite(sigma)
    s = sigma[ok]
    with np.errstate(divide="ignore"):
        third = np.minimum(math.log(2.0) / np.log(np.where(s >= SQRT2, s, 2.0)), 2.0)
    out[ok] = np.where(s < 1.0, 0.0, np.where(s < SQRT2, 2.0, third))
    return out


def delta_prime(params):
    """Location of X + X' in the continuous parameterization."""
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    if b == 0.0:
        return 2.0 * d
    if _is_alpha_one(a):
        s = 2.0 ** (1.0 / a)
        return 2.0 * d + (2.0 / math.pi) * b * g * (s * math.log(s * g) - 2.0 * math.log(g))
    return 2.0 * d + _tan_term(a) * b * g * (2.0 ** (1.0 / a) - 2.0)


def pair_sum_params(params):
    """Parameters of X + X' for X, X' iid ``params``."""
    return params.replace(
        gamma=sigma_from_alpha(params.alpha) * params.gamma,
        delta=delta_prime(params),
    )


def _cms_standard(alpha, beta, size, rng):
    """Standard variates in the classical parameterization (Weron 1996)."""
    v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = rng.standard_exponential(size)
    if _is_alpha_one(alpha):
        half_pi = math.pi / 2.0
        bv = half_pi + beta * v
        return (2.0 / math.pi) * (bv * np.tan(v) - beta * np.log(half_pi * w * np.cos(v) / bv))
    tan_pa = _tan_term(alpha)
    b_ab = math.atan(beta * tan_pa) / alpha
    s_ab = (1.0 + beta**2 * tan_pa**2) ** (1.0 / (2.0 * alpha))
    arg = alpha * (v + b_ab)
    return (
        s_ab
        * np.sin(arg)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - arg) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_stable(params, count, rng):
    """Draw ``count`` iid variates from ``params`` using ``rng``.

    Parameters
    ----------
    params : StableParams
    count : int or tuple of int
        Number of variates, or an output shape.
    rng : numpy.random.Generator
    """
    if isinstance(count, (int, np.integer)) and count < 1:
        raise ParameterDomainError(f"count must be >= 1, got {count}")
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    z = _cms_standard(a, b, count, rng)
    if _is_alpha_one(a):
        return g * z + d
    return g * (z - b * _tan_term(a)) + d


def numeric_quantile(params, p, mc_size, rng):
    """Monte-Carlo quantile of ``params`` by sample order statistics.

    Returns ``(estimate, standard_error)``.  ``p`` may be a scalar or an
    array of probabilities; all quantiles share one simulated sample.
    The standard error comes from the spread of the order statistics
    one binomial standard deviation either side of ``p``.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise ParameterDomainError(f"p must lie in (0, 1), got {p}")
    if mc_size < 10_000:
        raise ParameterDomainError(f"mc_size must be >= 1e4, got {mc_size}")
    x = np.sort(sample_stable(params, int(mc_size), rng))
    est = np.quantile(x, p_arr)
    half = np.sqrt(p_arr * (1.0 - p_arr) / mc_size)
    lo = np.quantile(x, np.clip(p_arr - half, 0.0, 1.0))
    hi = np.quantile(x, np.clip(p_arr + half, 0.0, 1.0))
    se = (hi - lo) / 2.0
    if np.ndim(p) == 0:
        return float(est[0]), float(se[0])
    return est, se
