"""Command-line front end.

Subcommands: ``enumerate`` lists the polynomial constraints of a tree,
``test`` runs the bootstrap test on a data CSV, ``simulate`` estimates
empirical size curves under the two factor-model setups, ``generate``
draws Gaussian samples, and ``check-metric`` applies the tree-metric
oracle to a distance matrix.  CSV is the canonical output; the
simulation additionally writes a static SVG of size versus level.

Every command is deterministic given its flags.  The master seed of
``simulate`` derives one seed pair per replication (data stream, test
stream) through ``SeedSequence`` spawn keys, so replications can run in
a worker pool and still aggregate identically.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from multiprocessing import get_context

import numpy as np
from numpy.random import SeedSequence

from ._svg import size_plot
from .bootstrap import (
    BootstrapConfig,
    multiplier_draws,
    quantile_from_draws,
    run_test,
    test_statistic,
)
from .estimators import build_estimate_matrix
from .metric import is_t_induced
from .model import (
    SampleMatrix,
    TreeModelParams,
    covariance_from_factor,
    covariance_from_tree,
    sample,
    setup_params,
)
from .tree import LatentTree, TreeError, enumerate_constraints, load_tree

_FLOAT = ".17g"


def _fmt(x) -> str:
    return format(float(x), _FLOAT)


def _write_rows(path, header, rows):
    """Write one CSV table to ``path``, or stdout when path is None."""

    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if path is None:
        emit(sys.stdout)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def _read_matrix_csv(path):
    """Read a CSV with one header row of names and float rows."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise ValueError(
                    f"{path} line {lineno}: expected {len(names)} fields, "
                    f"got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path} line {lineno}: non-numeric field")
    return [n.strip() for n in names], np.asarray(rows, dtype=float)


def _align_columns(names, values, tree):
    """Reorder CSV columns to the tree's observed order.

    Column names that are a permutation of the observed ids are matched
    by name; otherwise the count must agree and order is positional.
    """
    observed = list(tree.observed)
    if names == observed:
        return values
    if sorted(names) == sorted(observed):
        order = [names.index(v) for v in observed]
        # keep C layout so reductions round identically to the unshuffled path
        return np.ascontiguousarray(values[:, order])
    if len(names) == len(observed):
        return values
    raise ValueError(
        f"data has {len(names)} columns but the tree observes "
        f"{len(observed)} variables"
    )


def _star_tree(m: int) -> LatentTree:
    names = tuple(f"x{i}" for i in range(1, m + 1))
    return LatentTree(tuple(("h", v) for v in names), names)


def _parse_alpha_grid(spec: str):
    """Parse 'start:stop:step' or a comma-separated list of levels."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"alpha grid {spec!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("alpha grid step must be positive")
        grid = []
        k = 0
        while True:
            value = round(start + k * step, 10)
            if value > stop + step * 1e-9:
                break
            grid.append(value)
            k += 1
    else:
        grid = [round(float(p), 10) for p in spec.split(",") if p.strip()]
    if not grid:
        raise ValueError(f"alpha grid {spec!r} is empty")
    for a in grid:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha {a} not in (0, 1)")
    return grid


def _parse_params_file(path):
    """Read edge correlations and node scales.

    Lines are ``CORR <id> <id> <rho>`` or ``SD <id> <value>``; ``#``
    comments and blank lines are skipped.
    """
    edge_corr = {}
    node_sd = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            try:
                if fields[0] == "CORR" and len(fields) == 4:
                    edge_corr[(fields[1], fields[2])] = float(fields[3])
                elif fields[0] == "SD" and len(fields) == 3:
                    node_sd[fields[1]] = float(fields[2])
                else:
                    raise ValueError("expected 'CORR a b rho' or 'SD v s'")
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}")
    return edge_corr, (node_sd or None)


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate(args) -> int:
    tree = load_tree(args.tree)
    system = enumerate_constraints(tree)
    rows = []
    for i, (side, kind, indices, poly) in enumerate(system.scalar_rows(), start=1):
        del side
        label = " ".join(tree.observed[j] for j in indices)
        rows.append((f"c{i:03d}", kind, label, poly))
    _write_rows(args.out, ("constraint_id", "kind", "indices", "polynomial"), rows)
    return 0


def _bootstrap_config(args) -> BootstrapConfig:
    return BootstrapConfig(
        batch_size=args.batch,
        num_multipliers=args.multipliers,
        alpha=args.alpha,
        seed=args.seed,
        mode=args.mode,
        center=not args.no_center,
        subsample=args.subsample,
    )


def cmd_test(args) -> int:
    tree = load_tree(args.tree)
    system = enumerate_constraints(tree)
    names, values = _read_matrix_csv(args.data)
    data = SampleMatrix(_align_columns(names, values, tree), tuple(tree.observed))
    result = run_test(data, system, _bootstrap_config(args))
    report = {
        "statistic": result.statistic,
        "quantile": result.quantile,
        "p_value": result.p_value,
        "reject": result.reject,
        "k_effective": result.k_effective,
        "diag_floor_hits": result.diag_floor_hits,
        "alpha": args.alpha,
        "seed": args.seed,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if result.reject and args.exit_on_reject:
        return 3
    return 0


_WORKER = {}


def _init_simulate_worker(cov, system, n, batch, multipliers, mode, center,
                          subsample, entropy):
    _WORKER.update(
        cov=cov, system=system, n=n, batch=batch, multipliers=multipliers,
        mode=mode, center=center, subsample=subsample, entropy=entropy,
    )


def _simulate_rep(rep: int):
    """One replication: draw data, return the statistic and its draws.

    Uses the same per-run seed split as ``run_test`` (multiplier stream
    first, subsampling stream second) so a replication can be reproduced
    with the ``test`` command.
    """
    w = _WORKER
    data_ss = SeedSequence(entropy=w["entropy"], spawn_key=(rep, 0))
    test_ss = SeedSequence(entropy=w["entropy"], spawn_key=(rep, 1))
    mult_ss, sub_ss = test_ss.spawn(2)
    x = sample(w["cov"], w["n"], data_ss).data
    subsample = None
    if w["subsample"] is not None:
        subsample = (w["subsample"], sub_ss)
    seq = build_estimate_matrix(
        x, w["system"], mode=w["mode"], subsample=subsample, center=w["center"]
    )
    stat = test_statistic(seq, w["batch"])
    draws = multiplier_draws(seq, w["batch"], w["multipliers"], mult_ss)
    return rep, stat, draws


def cmd_simulate(args) -> int:
    alphas = _parse_alpha_grid(args.alpha_grid)
    system = enumerate_constraints(_star_tree(args.m))
    params = setup_params(
        args.setup, args.m, SeedSequence(entropy=args.seed, spawn_key=(0, 2))
    )
    cov = covariance_from_factor(params)
    init_args = (
        cov, system, args.n, args.batch, args.multipliers, args.mode,
        not args.no_center, args.subsample, args.seed,
    )
    reps = range(args.reps)
    if args.jobs > 1:
        ctx = get_context("spawn")
        with ctx.Pool(
            args.jobs, initializer=_init_simulate_worker, initargs=init_args
        ) as pool:
            results = pool.map(_simulate_rep, reps)
    else:
        _init_simulate_worker(*init_args)
        results = [_simulate_rep(rep) for rep in reps]
    results.sort(key=lambda r: r[0])

    rejects = np.zeros((len(alphas), args.reps), dtype=bool)
    for rep, stat, draws in results:
        for i, alpha in enumerate(alphas):
            rejects[i, rep] = stat > quantile_from_draws(draws, alpha)
    sizes = rejects.mean(axis=1)

    rows = [(repr(a), _fmt(s), args.reps) for a, s in zip(alphas, sizes)]
    _write_rows(args.out, ("alpha", "empirical_size", "reps"), rows)
    svg_path = args.svg
    if svg_path is None and args.out is not None:
        base = args.out[:-4] if args.out.endswith(".csv") else args.out
        svg_path = base + ".svg"
    if svg_path is not None:
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(size_plot(alphas, sizes, args.reps))
    return 0


def cmd_generate(args) -> int:
    ss = SeedSequence(args.seed)
    params_ss, data_ss = ss.spawn(2)
    if args.tree is not None:
        if args.params is None:
            raise ValueError("--tree needs --params with edge correlations")
        tree = load_tree(args.tree)
        edge_corr, node_sd = _parse_params_file(args.params)
        cov = covariance_from_tree(TreeModelParams(tree, edge_corr, node_sd))
        names = tuple(tree.observed)
    else:
        if args.m is None:
            raise ValueError("--setup needs --m")
        cov = covariance_from_factor(setup_params(args.setup, args.m, params_ss))
        names = tuple(f"x{i}" for i in range(1, args.m + 1))
    data = sample(cov, args.n, data_ss, names)
    rows = ([_fmt(v) for v in row] for row in data.data)
    _write_rows(args.out, names, rows)
    return 0


def cmd_check_metric(args) -> int:
    tree = load_tree(args.tree)
    names, values = _read_matrix_csv(args.data)
    if values.shape[0] != values.shape[1]:
        raise ValueError(
            f"distance matrix must be square, got {values.shape[0]}x"
            f"{values.shape[1]}"
        )
    delta = _align_columns(names, values, tree)
    if sorted(names) == sorted(tree.observed):
        order = [names.index(v) for v in tree.observed]
        delta = delta[order, :]
    report = is_t_induced(delta, tree)
    print("t-induced:", "yes" if report.is_induced else "no")
    violations = report.all_violations
    print(f"violations: {len(violations)}")
    for v in violations:
        label = " ".join(tree.observed[j] for j in v.indices)
        print(f"  {v.kind} [{label}] residual {format(v.residual, '.6g')}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_bootstrap_flags(p):
    p.add_argument("--alpha", type=float, default=0.05, help="test level")
    p.add_argument("--batch", type=int, default=3, help="batch size for variance")
    p.add_argument(
        "--multipliers", type=int, default=1000, help="bootstrap draw count"
    )
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument(
        "--subsample", type=int, default=None, metavar="K",
        help="test a random subset of K columns",
    )
    p.add_argument(
        "--mode", choices=("equalities", "all"), default="equalities",
        help="constraint families to test",
    )
    p.add_argument(
        "--no-center", action="store_true", help="skip column centering"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treegof",
        description="Goodness-of-fit tests for Gaussian latent tree models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list the constraints of a tree")
    p.add_argument("--tree", required=True, help="tree file")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("test", help="bootstrap test of a data CSV")
    p.add_argument("--tree", required=True, help="tree file")
    p.add_argument("--data", required=True, help="data CSV with header row")
    p.add_argument("--out", default=None, help="also write the report here")
    p.add_argument(
        "--exit-on-reject", action="store_true",
        help="exit with status 3 when the test rejects",
    )
    _add_bootstrap_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="empirical size curve of the test")
    p.add_argument("--setup", type=int, choices=(1, 2), required=True)
    p.add_argument("--m", type=int, required=True, help="observed variables")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--reps", type=int, required=True, help="replications")
    p.add_argument(
        "--alpha-grid", default="0.01:0.10:0.01",
        help="start:stop:step or comma-separated levels",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=None, help="size-curve CSV (default stdout)")
    p.add_argument(
        "--svg", default=None,
        help="SVG plot path (default: the CSV path with .svg)",
    )
    _add_bootstrap_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="draw Gaussian samples")
    p.add_argument("--setup", type=int, choices=(1, 2), default=None)
    p.add_argument("--m", type=int, default=None, help="observed variables")
    p.add_argument("--tree", default=None, help="tree file")
    p.add_argument("--params", default=None, help="CORR/SD parameter file")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser(
        "check-metric", help="tree-metric oracle on a distance matrix"
    )
    p.add_argument("--tree", required=True, help="tree file")
    p.add_argument("--data", required=True, help="square distance CSV")
    p.set_defaults(func=cmd_check_metric)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate" and (args.tree is None) == (args.setup is None):
        parser.error("generate needs exactly one of --setup or --tree")
    try:
        return args.func(args)
    except (TreeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
