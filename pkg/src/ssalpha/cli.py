"""Command-line interface: ``ssalpha <command> [options]``.

Commands
--------
estimate    split-sample estimate of alpha for a data file
simulate    Monte-Carlo bias/RMSE experiment
curve       RMSE as a function of alpha (plot-ready CSV)
mqe-table   build or refresh the cached McCulloch table
perm-count  number of distinct X/Y constructions for (n, m)
sample      draw stable variates

Data files hold one number per line; lines starting with ``#`` are
ignored.  Exit status is 0 on success, 2 for bad input or options and
3 when every split of an estimate fails.  For very heavy tails
(alpha < 1) ``--k 3`` is the more outlier-robust choice.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .al_estimator import TGrid
from .competitors import DEFAULT_MC_SIZE, DEFAULT_SEED, DEFAULT_TABLE_PATH, cached_mqe_table
from .exceptions import EstimationError, ParameterDomainError
from .sim_harness import (
    ExperimentSpec,
    default_workers,
    format_table,
    rmse_curve,
    run_experiment,
    write_aggregate_csv,
    write_records_csv,
)
from .split_sample import DEFAULT_B, DEFAULT_K, SplitConfig, permutation_count, sse_estimate
from .stable_core import StableParams, sample_stable


class InputError(Exception):
    pass


def read_data(path):
    values = []
    try:
        fh = sys.stdin if path == "-" else open(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return np.array(values)


def _sizes(args, available=None):
    n, m, size = args.n, args.m, args.size
    if n is None and m is None:
        if size is None:
            if available is None:
                raise InputError("give --size or --n/--m")
            n = m = available // 3
        else:
            n = m = size // 3
            if n + 2 * m != size:
                raise InputError(f"--size {size} is not a multiple of 3; give --n and --m")
    elif n is None:
        n = (size if size is not None else available) - 2 * m
    elif m is None:
        m = ((size if size is not None else available) - n) // 2
    if size is not None and n + 2 * m != size:
        raise InputError(f"--size {size} does not equal n + 2m = {n + 2 * m}")
    return n, m


def cmd_estimate(args):
    data = read_data(args.input)
    n, m = _sizes(args, available=data.size)
    need = n + 2 * m
    if n < 2 or m < 2 or data.size < need:
        raise InputError(f"need n + 2m = {need} values with n, m >= 2; {args.input} has {data.size}")
    if data.size > need:
        print(f"note: using the first {need} of {data.size} values", file=sys.stderr)
        data = data[:need]
    config = SplitConfig(n=n, m=m, b_splits=args.B, grid=TGrid.equispaced(args.k), seed=args.seed)
    try:
        est = sse_estimate(data, config)
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    ok = est.sigma_hats[np.isfinite(est.sigma_hats)]
    q = np.quantile(ok, [0.0, 0.25, 0.5, 0.75, 1.0])
    print(f"n={n} m={m} B={config.b_splits} k={config.grid.k} seed={config.seed}")
    print(f"alpha1 {est.alpha1:.6f}")
    print(f"alpha2 {est.alpha2:.6f}")
    print(f"alpha3 {est.alpha3:.6f}")
    print(f"failures {est.failures} of {est.b_splits}" + (" (unreliable)" if est.unreliable else ""))
    print(f"sigma mean {ok.mean():.6f} min {q[0]:.6f} q1 {q[1]:.6f} median {q[2]:.6f} "
          f"q3 {q[3]:.6f} max {q[4]:.6f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["split", "sigma_hat", "alpha_hat"])
            for b, (s, a) in enumerate(zip(est.sigma_hats, est.alpha_hats)):
                w.writerow([b, repr(float(s)), repr(float(a))])
    return 0


def _spec(args, sweep=None):
    estimators = [f"sse{k}" for k in args.k] if "sse" in args.estimators else []
    if "mqe" in args.estimators:
        estimators.append("mqe")
    if not estimators:
        raise InputError("no estimators selected")
    size = args.size
    if size is None:
        if args.n is None or args.m is None:
            raise InputError("give --size or both --n and --m")
        size = args.n + 2 * args.m
    return ExperimentSpec(
        params=StableParams(args.alpha, args.beta),
        total_size=size,
        n=args.n,
        m=args.m,
        b_splits=args.B,
        estimators=tuple(estimators),
        replications=args.N,
        seed=args.seed,
        alpha_sweep=sweep,
        workers=args.threads,
    )


def cmd_simulate(args):
    result = run_experiment(_spec(args))
    if args.records:
        write_records_csv(result.records, args.records)
    if args.aggregate:
        write_aggregate_csv(result, args.aggregate)
    print(format_table(result))
    return 0


def cmd_curve(args):
    sweep = tuple(float(a) for a in args.alphas.split(","))
    rows = rmse_curve(_spec(args, sweep=sweep))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["alpha", "estimator", "rmse", "smoothed"])
        for r in rows:
            w.writerow([f"{r.alpha:g}", r.estimator, repr(r.rmse), repr(r.smoothed)])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_mqe_table(args):
    path = args.out or DEFAULT_TABLE_PATH
    if args.force and path.exists():
        path.unlink()
    table = cached_mqe_table(path=path, mc_size=args.mc_size, seed=args.seed)
    print(f"table {path}: {table.alphas.size} alphas x {table.betas.size} betas, "
          f"mc_size={table.mc_size}, seed={table.seed}")
    return 0


def cmd_perm_count(args):
    count = permutation_count(args.n, args.m)
    print(count)
    print(f"{count:.6e}" if count < 10**300 else _sci(count))
    return 0


def _sci(count):
    s = str(count)
    return f"{s[0]}.{s[1:7]}e+{len(s) - 1}"


def cmd_sample(args):
    params = StableParams(args.alpha, args.beta, args.gamma, args.delta)
    x = sample_stable(params, args.count, np.random.default_rng(args.seed))
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write(f"# S(alpha={args.alpha:g}, beta={args.beta:g}, gamma={args.gamma:g}, "
                  f"delta={args.delta:g}) seed={args.seed}\n")
        out.writelines(f"{v!r}\n" for v in x.tolist())
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _add_sizes(p):
    p.add_argument("--size", type=int, help="total sample size n + 2m (m = n)")
    p.add_argument("--n", type=int, help="X-sample size")
    p.add_argument("--m", type=int, help="number of Y pairs")


def _add_experiment(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    _add_sizes(p)
    p.add_argument("--B", type=int, default=DEFAULT_B, help="splits per estimate")
    p.add_argument("--k", type=int, nargs="+", default=[DEFAULT_K], help="grid sizes (SSE_k)")
    p.add_argument("--N", type=int, default=300, help="replications")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimators", type=lambda s: s.split(","), default=["sse"],
                   help="comma list from {sse, mqe}")
    p.add_argument("--threads", type=int, default=default_workers(),
                   help="worker processes (env SSALPHA_THREADS)")


def build_parser():
    parser = argparse.ArgumentParser(prog="ssalpha", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate alpha for a data file")
    p.add_argument("input", help="newline-delimited numbers, or - for stdin")
    _add_sizes(p)
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="grid size; 3 for very heavy tails")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV of per-split sigma-hat")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="bias/RMSE experiment")
    _add_experiment(p)
    p.add_argument("--records", help="per-replication CSV")
    p.add_argument("--aggregate", help="aggregate CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("curve", help="RMSE over a sweep of alpha")
    _add_experiment(p)
    p.add_argument("--alphas", required=True, help="comma list of alpha values in (0, 2)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("mqe-table", help="build the McCulloch lookup table")
    p.add_argument("--mc-size", type=int, default=DEFAULT_MC_SIZE)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path)
    p.add_argument("--force", action="store_true", help="rebuild even if the cache matches")
    p.set_defaults(func=cmd_mqe_table)

    p = sub.add_parser("perm-count", help="count distinct X/Y constructions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_perm_count)

    p = sub.add_parser("sample", help="draw stable variates")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ParameterDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
