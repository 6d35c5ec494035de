"""Monte-Carlo experiments for split-sample and McCulloch estimators.

Seeding: replication ``r`` of an experiment with master seed ``s``
draws its data from ``default_rng([s, r, attempt])`` and runs the
split-sample estimator with the integer seed
``SeedSequence([s, r, attempt]).generate_state(1)[0]``.  Replications
are therefore independent of each other and of the order in which
they run, and extending ``replications`` leaves earlier ones intact.
``attempt`` is 0, or 1 for the single redraw made when every
estimator failed on the first draw.
"""

from __future__ import annotations

import csv
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .al_estimator import TGrid
from .competitors import cached_mqe_table, mqe_estimate
from .exceptions import EstimationError, ParameterDomainError
from .split_sample import DEFAULT_B, SplitConfig, boundary_rate, sse_estimate
from .stable_core import StableParams, sample_stable

RECORD_FIELDS = [
    "replication", "estimator", "alpha_hat", "sigma_bar", "failures", "elapsed_ms",
    "boundary0", "boundary2",
]
AGGREGATE_FIELDS = ["config_id", "estimator", "bias", "rmse", "boundary0", "boundary2", "n_success"]
COMBINERS = ("a1", "a2", "a3")


@dataclass(frozen=True)
class ExperimentSpec:
    """One simulation design.

    ``estimators`` holds ids ``"sse<k>"`` (split-sample with an
    equispaced grid of k points; reported as ``sse<k>_a1/_a2/_a3``)
    and ``"mqe"``.
    """

    params: StableParams
    total_size: int
    n: int | None = None
    m: int | None = None
    b_splits: int = DEFAULT_B
    estimators: tuple = ("sse9",)
    replications: int = 300
    seed: int = 0
    alpha_sweep: tuple | None = None
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterDomainError("replications must be >= 1")
        n, m = self.n, self.m
        if n is None and m is None:
            if self.total_size % 3:
                raise ParameterDomainError(
                    f"total size {self.total_size} is not a multiple of 3; give n and m")
            n = m = self.total_size // 3
        elif n is None:
            n = self.total_size - 2 * m
        elif m is None:
            m, rem = divmod(self.total_size - n, 2)
            if rem:
                raise ParameterDomainError("total_size - n must be even")
        if n + 2 * m != self.total_size or n < 2 or m < 2:
            raise ParameterDomainError(f"need n + 2m = total_size with n, m >= 2 (n={n}, m={m})")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        for est in self.estimators:
            if est != "mqe" and not (est.startswith("sse") and est[3:].isdigit() and int(est[3:]) >= 1):
                raise ParameterDomainError(f"unknown estimator {est!r}")
        if self.alpha_sweep is not None:
            if not self.alpha_sweep or any(not 0 < a < 2 for a in self.alpha_sweep):
                raise ParameterDomainError("alpha_sweep must be a non-empty set of values in (0, 2)")

    @property
    def config_id(self):
        p = self.params
        return (f"alpha={p.alpha:g};beta={p.beta:g};size={self.total_size};"
                f"n={self.n};m={self.m};B={self.b_splits};seed={self.seed}")

    def estimator_ids(self):
        ids = []
        for est in self.estimators:
            ids += [est] if est == "mqe" else [f"{est}_{c}" for c in COMBINERS]
        return ids


@dataclass(frozen=True)
class EstimateRecord:
    replication: int
    estimator: str
    alpha_hat: float
    sigma_bar: float = math.nan
    failures: int = 0
    elapsed_ms: float = field(default=0.0, compare=False)
    boundary0: float = math.nan
    boundary2: float = math.nan

    @property
    def ok(self):
        return math.isfinite(self.alpha_hat)


@dataclass(frozen=True)
class Aggregate:
    estimator: str
    bias: float
    rmse: float
    boundary0: float
    boundary2: float
    n_success: int
    failure_rate: float


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    records: tuple
    aggregates: dict
    elapsed_s: float = field(default=0.0, compare=False)


def _same(a, b):
    return a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))


def records_equal(r1, r2):
    """Record-wise equality treating NaN as equal to NaN (timings ignored)."""
    if len(r1) != len(r2):
        return False
    names = [f for f in RECORD_FIELDS if f != "elapsed_ms"]
    return all(_same(getattr(a, f), getattr(b, f)) for a, b in zip(r1, r2) for f in names)


def _run_sse(data, spec, k, rep, sse_seed):
    t0 = time.perf_counter()
    config = SplitConfig(n=spec.n, m=spec.m, b_splits=spec.b_splits,
                         grid=TGrid.equispaced(k), seed=sse_seed)
    try:
        with warnings.catch_warnings():
            # failures are recorded per replication instead
            warnings.simplefilter("ignore", RuntimeWarning)
            est = sse_estimate(data, config)
    except EstimationError:
        ms = 1000 * (time.perf_counter() - t0)
        return [EstimateRecord(rep, f"sse{k}_{c}", math.nan, math.nan, spec.b_splits, ms)
                for c in COMBINERS]
    ms = 1000 * (time.perf_counter() - t0)
    b0, b2 = boundary_rate(est)
    values = (est.alpha1, est.alpha2, est.alpha3)
    return [EstimateRecord(rep, f"sse{k}_{c}", v, est.sigma_bar, est.failures, ms, b0, b2)
            for c, v in zip(COMBINERS, values)]


def _run_mqe(data, rep, table):
    t0 = time.perf_counter()
    try:
        value = mqe_estimate(data, table)
        failures = 0
    except ValueError:
        value, failures = math.nan, 1
    return [EstimateRecord(rep, "mqe", value, math.nan, failures, 1000 * (time.perf_counter() - t0))]


def run_replication(spec, rep, table=None):
    """All estimator records for replication ``rep`` of ``spec``."""
    if "mqe" in spec.estimators and table is None:
        table = cached_mqe_table()
    for attempt in (0, 1):
        key = [spec.seed, rep, attempt]
        data = sample_stable(spec.params, spec.total_size, np.random.default_rng(key))
        sse_seed = int(np.random.SeedSequence(key).generate_state(1)[0])
        records = []
        for est in spec.estimators:
            if est == "mqe":
                records += _run_mqe(data, rep, table)
            else:
                records += _run_sse(data, spec, int(est[3:]), rep, sse_seed)
        if any(r.ok for r in records):
            break
    return records


def _worker(args):
    spec, reps = args
    table = cached_mqe_table() if "mqe" in spec.estimators else None
    return [r for rep in reps for r in run_replication(spec, rep, table)]


def default_workers():
    env = os.environ.get("SSALPHA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(spec, progress=None):
    """Run every replication of ``spec`` and aggregate the records."""
    t0 = time.perf_counter()
    reps = list(range(spec.replications))
    if spec.workers <= 1:
        table = cached_mqe_table() if "mqe" in spec.estimators else None
        records = []
        for rep in reps:
            records += run_replication(spec, rep, table)
            if progress is not None:
                progress(rep + 1, spec.replications)
    else:
        chunks = [reps[i::spec.workers * 4] for i in range(spec.workers * 4)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(_worker, [(spec, c) for c in chunks]))
        records = [r for part in parts for r in part]
    order = {eid: i for i, eid in enumerate(spec.estimator_ids())}
    records.sort(key=lambda r: (r.replication, order[r.estimator]))
    aggregates = {}
    for est in spec.estimator_ids():
        group = [r for r in records if r.estimator == est]
        if any(r.ok for r in group):
            aggregates.update(aggregate(group, spec.params.alpha))
    return ExperimentResult(spec, tuple(records), aggregates, time.perf_counter() - t0)


def bias_rmse(estimates, true_alpha):
    """Monte-Carlo bias and RMSE of a vector of estimates."""
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise EstimationError("no successful estimates")
    err = e - true_alpha
    return float(err.mean()), float(math.sqrt(np.mean(err * err)))


def aggregate(records, true_alpha):
    """Bias, RMSE and boundary rates per estimator over successful records."""
    by_est = {}
    for r in records:
        by_est.setdefault(r.estimator, []).append(r)
    if not by_est:
        raise EstimationError("no records to aggregate")
    out = {}
    for est, recs in by_est.items():
        good = [r for r in recs if r.ok]
        if not good:
            raise EstimationError(f"estimator {est} has no successful records")
        bias, rmse = bias_rmse([r.alpha_hat for r in good], true_alpha)
        b0 = [r.boundary0 for r in good if math.isfinite(r.boundary0)]
        b2 = [r.boundary2 for r in good if math.isfinite(r.boundary2)]
        out[est] = Aggregate(
            estimator=est,
            bias=bias,
            rmse=rmse,
            boundary0=float(np.mean(b0)) if b0 else math.nan,
            boundary2=float(np.mean(b2)) if b2 else math.nan,
            n_success=len(good),
            failure_rate=1.0 - len(good) / len(recs),
        )
    return out


@dataclass(frozen=True)
class CurveRow:
    alpha: float
    estimator: str
    rmse: float
    smoothed: float


def moving_average3(values):
    """Centered window-3 average; the end points average the two available values."""
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    for i in range(v.size):
        out[i] = v[max(i - 1, 0):i + 2].mean()
    return out


def rmse_curve(spec):
    """RMSE per (alpha, estimator) over ``spec.alpha_sweep`` with a smoothed column."""
    if not spec.alpha_sweep:
        raise ParameterDomainError("spec has no alpha_sweep")
    raw = {}
    for alpha in spec.alpha_sweep:
        sub = replace(spec, params=spec.params.replace(alpha=float(alpha)), alpha_sweep=None)
        result = run_experiment(sub)
        for est in spec.estimator_ids():
            agg = result.aggregates.get(est)
            raw.setdefault(est, []).append(agg.rmse if agg else math.nan)
    rows = []
    for est in spec.estimator_ids():
        smooth = moving_average3(raw[est])
        rows += [CurveRow(float(a), est, r, float(s))
                 for a, r, s in zip(spec.alpha_sweep, raw[est], smooth)]
    rows.sort(key=lambda row: (spec.alpha_sweep.index(row.alpha), row.estimator))
    return rows


# -- persistence -------------------------------------------------------------


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])


def read_records_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EstimateRecord(
                replication=int(row["replication"]),
                estimator=row["estimator"],
                alpha_hat=float(row["alpha_hat"]),
                sigma_bar=float(row["sigma_bar"]),
                failures=int(row["failures"]),
                elapsed_ms=float(row["elapsed_ms"]),
                boundary0=float(row.get("boundary0", "nan")),
                boundary2=float(row.get("boundary2", "nan")),
            ))
    return out


def write_aggregate_csv(result, path, mode="w"):
    new = mode == "w" or not os.path.exists(path)
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(AGGREGATE_FIELDS)
        for est in result.spec.estimator_ids():
            a = result.aggregates.get(est)
            if a is None:
                continue
            w.writerow([result.spec.config_id, est, _fmt(a.bias), _fmt(a.rmse),
                        _fmt(a.boundary0), _fmt(a.boundary2), a.n_success])


def read_aggregate_csv(path):
    with open(path, newline="") as fh:
        return [
            {**row, "bias": float(row["bias"]), "rmse": float(row["rmse"]),
             "boundary0": float(row["boundary0"]), "boundary2": float(row["boundary2"]),
             "n_success": int(row["n_success"])}
            for row in csv.DictReader(fh)
        ]


def format_table(result):
    """Plain-text estimator x (Bias, RMSE) table."""
    lines = [result.spec.config_id,
             f"{'estimator':<12}{'Bias':>10}{'RMSE':>10}{'at 0 %':>9}{'at 2 %':>9}{'ok':>6}"]
    for est in result.spec.estimator_ids():
        a = result.aggregates.get(est)
        if a is None:
            lines.append(f"{est:<12}{'N/A':>10}{'N/A':>10}")
            continue
        b0 = "" if math.isnan(a.boundary0) else f"{100 * a.boundary0:.2f}"
        b2 = "" if math.isnan(a.boundary2) else f"{100 * a.boundary2:.2f}"
        lines.append(f"{est:<12}{a.bias:>10.3f}{a.rmse:>10.3f}{b0:>9}{b2:>9}{a.n_success:>6}")
    return "\n".join(lines)
