"""Command-line entry point: ``stand generate|solve|bench|verify|inspect``.

Settings come from, in increasing priority: built-in defaults, the
``STAND_SEED`` environment variable (seed only), an optional config file
(``--config``, INI sections named after subcommands) and command-line flags.

Exit codes: 0 ok, 1 verification failure, 2 generation failure,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bench import DEFAULT_CONFIGS, BenchConfig, BenchError, load_problem_set, run_benchmark
from .dataset import (
    CATEGORIES,
    DEFAULT_PROBLEMS_PER_SPLIT,
    SPLITS,
    DatasetError,
    build_split,
    find_problem_dirs,
    find_split_dirs,
    import_problem,
    read_manifest,
    rebuild_frame,
)
from .fem import assemble_load_vector, reactions
from .solvers import NotPositiveDefinite, SolverConfig, cholesky, solve, standard_error
from .solvers.ordering import bandwidth
from .solvers.report import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    ORDERING_NAMES,
    PRECONDITIONER_NAMES,
)
from .structgen import GenerationError, format_geometry

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_GENERATE = 2
EXIT_NOT_CONVERGED = 3

RESIDUAL_LIMIT = 1e-10
SELF_CONSISTENCY_LIMIT = 1e-10
EQUILIBRIUM_LIMIT = 1e-6


def _default_seed() -> int:
    raw = os.environ.get("STAND_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise SystemExit(f"STAND_SEED must be an integer, got {raw!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _err(msg: str) -> None:
    print(f"stand: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    if args.count < 1:
        _err("--count must be at least 1")
        return EXIT_GENERATE
    cats = CATEGORIES if args.category == "all" else (args.category,)
    splits = SPLITS if args.split == "all" else (args.split,)
    out = Path(args.out)
    for split in splits:
        for cat in cats:
            t0 = time.perf_counter()
            try:
                manifest, stats = build_split(split, cat, args.count, args.seed, out, args.multiplicity, args.jobs)
            except (GenerationError, NotPositiveDefinite, OSError) as e:
                _err(f"generation failed for {split}/{cat}: {e}")
                return EXIT_GENERATE
            n = np.array([s[1] for s in stats])
            nnz = np.array([s[2] for s in stats])
            print(
                f"{split}/{cat}: {manifest.count} problems, {len(manifest.structure_seeds)} structures, "
                f"dofs mean {n.mean():.1f} min {n.min()} max {n.max()}, "
                f"nnz mean {nnz.mean():.1f} max {nnz.max()} ({time.perf_counter() - t0:.1f} s)"
            )
    return EXIT_OK


# --------------------------------------------------------------------------
# solve


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        method=args.method,
        ordering=args.ordering,
        preconditioner=args.precond,
        omega=args.omega,
        tolerance=args.tol,
        max_iterations=args.maxiter,
    )


def cmd_solve(args) -> int:
    try:
        problem = import_problem(args.problem)
    except DatasetError as e:
        _err(str(e))
        return EXIT_VERIFY
    config = _solver_config(args)
    try:
        report = solve(problem.K, problem.f, config, reference=problem.u)
    except NotPositiveDefinite as e:
        _err(f"solver breakdown: {e}")
        return EXIT_NOT_CONVERGED
    print(f"problem      {args.problem} (n={problem.K.n}, nnz={problem.K.nnz})")
    print(report.format())
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# --------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    labels = [s.strip() for s in args.configs.split(",") if s.strip()]
    try:
        config = BenchConfig.from_labels(labels, repetitions=args.reps, warmup=args.warmup, aggregation=args.aggregation)
    except ValueError as e:
        _err(f"bad --configs: {e}")
        return EXIT_VERIFY
    try:
        problems = load_problem_set(args.dataset, args.limit)
        result = run_benchmark(config, problems)
    except (DatasetError, BenchError) as e:
        _err(str(e))
        return EXIT_VERIFY
    print(result.to_table(), end="")
    if args.out:
        tsv, txt = result.write(args.out)
        print(f"wrote {tsv} and {txt}")
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def verify_problem(directory) -> list[str]:
    """Every invariant of one stored problem; returns violation messages."""
    d = Path(directory)
    try:
        p = import_problem(d)
    except DatasetError as e:
        return [str(e)]
    errs = []
    K = p.K
    kfile = d / "K.mtx"
    if not K.is_symmetric():
        errs.append(f"{kfile}: matrix is not symmetric")
    if np.any(K.diagonal() <= 0):
        errs.append(f"{kfile}: non-positive diagonal entry")
    try:
        factor = cholesky(K, "amd")
    except NotPositiveDefinite as e:
        return errs + [f"{kfile}: not positive definite ({e})"]
    res = p.residual
    if not res <= RESIDUAL_LIMIT:
        errs.append(f"{d / 'u.mtx'}: residual {res:.3e} exceeds {RESIDUAL_LIMIT:g}")
    if np.linalg.norm(p.u) > 0:
        se = standard_error(factor.solve(p.f), p.u)
        if not se <= SELF_CONSISTENCY_LIMIT:
            errs.append(f"{d / 'u.mtx'}: differs from a fresh solve (SE {se:.3e})")
    try:
        frame, dofmap, loads = rebuild_frame(p.meta)
    except (GenerationError, ValueError) as e:
        return errs + [f"{d / 'meta.txt'}: cannot rebuild structure ({e})"]
    if dofmap.n != K.n:
        errs.append(f"{d / 'meta.txt'}: rebuilt structure has {dofmap.n} dofs, K has {K.n}")
        return errs
    f = assemble_load_vector(frame, dofmap, loads)
    if np.linalg.norm(f - p.f) > 1e-12 * max(np.linalg.norm(f), 1e-300):
        errs.append(f"{d / 'f.mtx'}: load vector disagrees with the recorded action")
    imb = reactions(frame, dofmap, p.u, loads).imbalance()
    if np.max(imb) > EQUILIBRIUM_LIMIT:
        errs.append(f"{d / 'u.mtx'}: support reactions out of balance ({np.max(imb):.3e})")
    return errs


def verify_manifest(directory) -> list[str]:
    d = Path(directory)
    try:
        m = read_manifest(d)
    except DatasetError as e:
        return [str(e)]
    path = d / "manifest.txt"
    errs = [f"{path}: {v}" for v in m.validate()]
    listed = {pid for pid, _, _ in m.entries}
    present = {p.name for p in d.iterdir() if (p / "meta.txt").exists()}
    for pid in sorted(listed - present):
        errs.append(f"{path}: problem {pid} listed but missing")
    for pid in sorted(present - listed):
        errs.append(f"{path}: problem {pid} present but not listed")
    for pid, s, a in m.entries:
        if pid not in present:
            continue
        try:
            meta = import_problem(d / pid, verify_checksums=False).meta
        except DatasetError:
            continue  # reported by the per-problem check
        if (meta.seed, meta.action_seed, meta.category) != (s, a, m.category):
            errs.append(f"{d / pid / 'meta.txt'}: seeds or category disagree with {path}")
    return errs


def cmd_verify(args) -> int:
    root = Path(args.dataset)
    if not root.is_dir():
        _err(f"{root}: not a directory")
        return EXIT_VERIFY
    dirs = find_problem_dirs(root)
    if not dirs:
        _err(f"{root}: no problems found")
        return EXIT_VERIFY
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(verify_problem, dirs))
    else:
        results = [verify_problem(d) for d in dirs]
    errors = [e for errs in results for e in errs]
    for split_dir in find_split_dirs(root):
        errors += verify_manifest(split_dir)
    for e in errors:
        print(f"FAIL {e}")
    print(f"checked {len(dirs)} problems: {'ok' if not errors else f'{len(errors)} violation(s)'}")
    return EXIT_VERIFY if errors else EXIT_OK


# --------------------------------------------------------------------------
# inspect


def cmd_inspect(args) -> int:
    try:
        p = import_problem(args.problem)
    except DatasetError as e:
        _err(str(e))
        return EXIT_VERIFY
    if args.geometry:
        frame, _, _ = rebuild_frame(p.meta)
        print(format_geometry(frame), end="")
        return EXIT_OK
    print(p.meta.to_text(), end="")
    K = p.K
    print(f"stats.nnz_per_row = {K.nnz / K.n:.2f}")
    print(f"stats.density = {K.nnz / K.n**2:.3e}")
    print(f"stats.bandwidth = {bandwidth(K)}")
    print(f"stats.residual = {p.residual:.3e}")
    print(f"stats.norm_f = {np.linalg.norm(p.f):.6e}")
    print(f"stats.norm_u = {np.linalg.norm(p.u):.6e}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stand",
        description="Generate static-analysis problems for 3D frames and benchmark sparse SPD solvers.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        epilog="Exit codes: 0 ok, 1 verification failure, 2 generation failure, 3 non-convergence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with one section per subcommand; flags override it")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    g = sub.add_parser("generate", help="generate a dataset split", formatter_class=fmt)
    g.add_argument("--category", choices=CATEGORIES + ("all",), default="small", help="size category")
    g.add_argument("--count", type=int, default=DEFAULT_PROBLEMS_PER_SPLIT, help="problems per split and category")
    g.add_argument("--seed", type=_seed, default=_default_seed(), help="base seed (env STAND_SEED)")
    g.add_argument("--split", choices=SPLITS + ("all",), default="test", help="dataset split")
    g.add_argument("--out", default="dataset", help="output root directory")
    g.add_argument("--multiplicity", type=int, default=None, help="fixed actions per structure for train splits")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one stored problem", formatter_class=fmt)
    s.add_argument("--problem", required=True, help="problem directory")
    s.add_argument("--method", choices=("cholesky", "cg"), default="cg", help="solver")
    s.add_argument("--precond", choices=PRECONDITIONER_NAMES, default="ic0", help="CG preconditioner")
    s.add_argument("--ordering", choices=ORDERING_NAMES, default="amd", help="Cholesky fill-reducing ordering")
    s.add_argument("--omega", type=float, default=1.0, help="SSOR relaxation factor")
    s.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE, help="CG relative residual tolerance")
    s.add_argument("--maxiter", type=int, default=DEFAULT_MAX_ITERATIONS, help="CG iteration cap")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="benchmark solver configurations", formatter_class=fmt)
    b.add_argument("--dataset", required=True, help="dataset root (all problems below it are used)")
    b.add_argument("--configs", default=",".join(DEFAULT_CONFIGS), help="comma-separated method:variant[:omega] labels")
    b.add_argument("--reps", type=int, default=5, help="timed repetitions per problem")
    b.add_argument("--warmup", type=int, default=1, help="discarded warmup runs per problem")
    b.add_argument("--aggregation", choices=("median", "mean"), default="median", help="per-problem aggregate")
    b.add_argument("--limit", type=int, default=None, help="at most this many problems per category")
    b.add_argument("--out", default=None, help="directory for bench.tsv and bench.txt")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="re-check every dataset invariant", formatter_class=fmt)
    v.add_argument("--dataset", required=True, help="dataset root")
    v.add_argument("--jobs", type=int, default=1, help="worker processes")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("inspect", help="print metadata and statistics of a problem", formatter_class=fmt)
    i.add_argument("--problem", required=True, help="problem directory")
    i.add_argument("--geometry", action="store_true", help="print the frame geometry instead")
    i.set_defaults(func=cmd_inspect)
    return parser


def _apply_config(parser: argparse.ArgumentParser, path: str, command: str) -> None:
    """Install values from the config file's ``[command]`` section as defaults."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise SystemExit(f"stand: cannot read config {path}: {e}") from None
    if not cp.has_section(command):
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    actions = {a.dest: a for a in sub._actions}
    values = {}
    for key, raw in cp.items(command):
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None or dest == "help":
            raise SystemExit(f"stand: {path}: unknown option {key!r} in [{command}]")
        if isinstance(action, argparse._StoreTrueAction):
            values[dest] = cp.getboolean(command, key)
        else:
            values[dest] = raw  # argparse converts string defaults with the option's type
    sub.set_defaults(**values)
    for dest in values:
        actions[dest].required = False


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if known.config and command in ("generate", "solve", "bench", "verify", "inspect"):
        _apply_config(parser, known.config, command)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
