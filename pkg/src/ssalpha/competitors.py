"""McCulloch's quantile estimator of the stability index.

The estimator compares two sample quantile ratios,

    nu_alpha = (q95 - q05) / (q75 - q25)
    nu_beta  = (q95 + q05 - 2 q50) / (q95 - q05),

against a lookup table of their population values.  The table here is
computed by brute-force simulation rather than transcribed, and is
cached as a text file whose header records how it was built.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .empirical import SortedSample, equantile
from .exceptions import DegenerateSampleError, ParameterDomainError, TableBuildError
from .stable_core import StableParams, numeric_quantile

log = logging.getLogger(__name__)

TABLE_VERSION = 1
DEFAULT_ALPHAS = tuple(round(0.5 + 0.1 * i, 10) for i in range(16))
DEFAULT_BETAS = (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_MC_SIZE = 4_000_000
DEFAULT_SEED = 1986
DEFAULT_TABLE_PATH = Path(__file__).with_name("data") / "mqe_table.txt"

_PROBS = np.array([0.05, 0.25, 0.5, 0.75, 0.95])


def quantile_ratios(q05, q25, q50, q75, q95):
    nu_alpha = (q95 - q05) / (q75 - q25)
    nu_beta = (q95 + q05 - 2.0 * q50) / (q95 - q05)
    return nu_alpha, nu_beta


@dataclass(frozen=True)
class MqeTable:
    """nu_alpha and nu_beta on an (alpha, beta) grid; arrays indexed [alpha, beta]."""

    alphas: np.ndarray
    betas: np.ndarray
    nu_alpha: np.ndarray
    nu_beta: np.ndarray
    mc_size: int
    seed: int

    def header(self):
        return {
            "version": str(TABLE_VERSION),
            "alphas": ",".join(f"{a:g}" for a in self.alphas),
            "betas": ",".join(f"{b:g}" for b in self.betas),
            "mc_size": str(self.mc_size),
            "seed": str(self.seed),
        }

    def validate(self):
        steps = np.diff(self.nu_alpha, axis=0)
        if np.any(steps >= 0):
            bad = np.argwhere(steps >= 0)[0]
            raise TableBuildError(
                f"nu_alpha not decreasing in alpha at alpha={self.alphas[bad[0]]:g}, "
                f"beta={self.betas[bad[1]]:g}; increase mc_size"
            )


def build_mqe_table(alpha_grid=DEFAULT_ALPHAS, beta_grid=DEFAULT_BETAS,
                    mc_size=DEFAULT_MC_SIZE, rng=None, seed=DEFAULT_SEED):
    """Simulate the quantile-ratio table.

    Cells with beta < 0 are filled by reflection from -beta when that
    cell is also on the grid (nu_alpha is even in beta, nu_beta odd).
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    betas = np.asarray(beta_grid, dtype=float)
    if alphas.min() < 0.5 or alphas.max() > 2.0 or np.any(np.abs(betas) > 1.0):
        raise ParameterDomainError("grid must lie within [0.5, 2] x [-1, 1]")
    if mc_size < 1_000_000:
        raise ParameterDomainError(f"mc_size must be >= 1e6, got {mc_size}")
    if rng is None:
        rng = np.random.default_rng(seed)
    nu_a = np.full((alphas.size, betas.size), np.nan)
    nu_b = np.full_like(nu_a, np.nan)
    beta_list = list(betas)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            if b < 0 and -b in beta_list:
                continue
            q, _ = numeric_quantile(StableParams(float(a), float(b)), _PROBS, mc_size, rng)
            nu_a[i, j], nu_b[i, j] = quantile_ratios(*q)
            log.debug("alpha=%g beta=%g nu_alpha=%.4f nu_beta=%.4f", a, b, nu_a[i, j], nu_b[i, j])
        for j, b in enumerate(betas):
            if b < 0 and -b in beta_list:
                src = beta_list.index(-b)
                nu_a[i, j], nu_b[i, j] = nu_a[i, src], -nu_b[i, src]
    table = MqeTable(alphas, betas, nu_a, nu_b, int(mc_size), int(seed))
    table.validate()
    return table


def save_mqe_table(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# McCulloch quantile-ratio table"]
    lines += [f"# {key} = {val}" for key, val in table.header().items()]
    lines.append("alpha beta nu_alpha nu_beta")
    for i, a in enumerate(table.alphas):
        for j, b in enumerate(table.betas):
            lines.append(f"{a:g} {b:g} {table.nu_alpha[i, j]:.10g} {table.nu_beta[i, j]:.10g}")
    path.write_text("\n".join(lines) + "\n")


def load_mqe_table(path):
    header = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if "=" in line:
                key, val = line[1:].split("=", 1)
                header[key.strip()] = val.strip()
        elif line.strip() and not line.startswith("alpha"):
            rows.append([float(v) for v in line.split()])
    alphas = np.array([float(v) for v in header["alphas"].split(",")])
    betas = np.array([float(v) for v in header["betas"].split(",")])
    data = np.array(rows).reshape(alphas.size, betas.size, 4)
    return MqeTable(
        alphas=alphas,
        betas=betas,
        nu_alpha=data[:, :, 2],
        nu_beta=data[:, :, 3],
        mc_size=int(header["mc_size"]),
        seed=int(header["seed"]),
    ), header


def cached_mqe_table(path=DEFAULT_TABLE_PATH, alpha_grid=DEFAULT_ALPHAS, beta_grid=DEFAULT_BETAS,
                     mc_size=DEFAULT_MC_SIZE, seed=DEFAULT_SEED):
    """Load the cached table, rebuilding it when the header does not match."""
    want = MqeTable(np.asarray(alpha_grid, float), np.asarray(beta_grid, float),
                    None, None, int(mc_size), int(seed)).header()
    path = Path(path)
    if path.exists():
        table, header = load_mqe_table(path)
        if header == want:
            return table
        log.info("MQE table header mismatch, rebuilding %s", path)
    table = build_mqe_table(alpha_grid, beta_grid, mc_size, seed=seed)
    try:
        save_mqe_table(table, path)
    except OSError as exc:
        log.warning("could not cache MQE table at %s: %s", path, exc)
    return table


def _alpha_on_slice(table, j, nu_alpha):
    # nu_alpha decreases in alpha, so interpolate on the reversed column
    col = table.nu_alpha[:, j]
    return float(np.interp(nu_alpha, col[::-1], table.alphas[::-1]))


def invert_table(table, nu_alpha, nu_beta):
    """Index estimate for given ratio statistics, clamped to [0.5, 2]."""
    alphas_j = np.array([_alpha_on_slice(table, j, nu_alpha) for j in range(table.betas.size)])
    nub_j = np.array([np.interp(alphas_j[j], table.alphas, table.nu_beta[:, j])
                      for j in range(table.betas.size)])
    if nu_beta <= nub_j[0]:
        est = alphas_j[0]
    elif nu_beta >= nub_j[-1]:
        est = alphas_j[-1]
    else:
        est = alphas_j[-1]
        for j in range(table.betas.size - 1):
            lo, hi = nub_j[j], nub_j[j + 1]
            if lo <= nu_beta <= hi:
                w = 0.5 if hi == lo else (nu_beta - lo) / (hi - lo)
                est = (1.0 - w) * alphas_j[j] + w * alphas_j[j + 1]
                break
    return float(min(max(est, 0.5), 2.0))


def mqe_estimate(data, table):
    """McCulloch quantile estimate of alpha from ``data`` (at least 20 values)."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 20:
        raise ParameterDomainError(f"need at least 20 observations, got {data.size}")
    sample = SortedSample(data)
    q = equantile(sample, _PROBS)
    if sample._zero_iqr or not q[3] - q[1] > 0:
        raise DegenerateSampleError("sample interquartile range is zero")
    nu_alpha, nu_beta = quantile_ratios(*q)
    return invert_table(table, nu_alpha, nu_beta)
