"""Benchmark harness: times solver configurations over problem sets.

Times are taken per problem as the median (or mean) of several timed
repetitions after discarded warmups, then averaged across the problems of a
category. A configuration counts as converged on a category iff the mean
standard error against the stored references is below 1e-3; otherwise its
time is shown as "-".
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import CATEGORIES, Problem, find_problem_dirs, import_problem
from .solvers import NotPositiveDefinite, SolveReport, SolverConfig, solve, standard_error

CONVERGENCE_SE = 1e-3
AGGREGATIONS = ("median", "mean")
MODULES = {"cholesky": "stand.solvers.cholesky", "cg": "stand.solvers.cg"}

DEFAULT_CONFIGS = (
    "cholesky:natural",
    "cholesky:rcm",
    "cholesky:amd",
    "cg:none",
    "cg:jacobi",
    "cg:ssor",
    "cg:ic0",
    "cg:ilu0",
)

# Timed sections never overlap, even if callers use threads.
_timing_lock = threading.Lock()


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    solvers: tuple[SolverConfig, ...]
    repetitions: int = 5
    warmup: int = 1
    aggregation: str = "median"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
        if not self.solvers:
            raise ValueError("no solver configurations")

    @classmethod
    def from_labels(cls, labels, **kw) -> "BenchConfig":
        return cls(tuple(SolverConfig.parse(s) for s in labels), **kw)


def _failed_report(config: SolverConfig, n: int, err: Exception) -> SolveReport:
    return SolveReport(
        solution=np.full(n, np.nan),
        iterations=0,
        residual=math.inf,
        standard_error=math.inf,
        wall_time=math.nan,
        converged=False,
        method=config.method,
        variant=config.variant,
        fallback=f"error: {err}",
    )


def time_solver(
    problem: Problem,
    config: SolverConfig,
    repetitions: int = 5,
    warmup: int = 1,
    aggregation: str = "median",
) -> SolveReport:
    """Solve ``problem`` repeatedly; the report carries every timed sample.

    ``wall_time`` is the aggregate of the timed samples; SE is computed
    outside the timed region against the stored reference. Solver failures
    come back as a non-converged report with infinite SE.
    """
    if not _timing_lock.acquire(blocking=False):
        raise RuntimeError("timed sections may not interleave")
    try:
        samples = []
        report = None
        for i in range(warmup + repetitions):
            try:
                report = solve(problem.K, problem.f, config)
            except (NotPositiveDefinite, FloatingPointError) as e:
                return _failed_report(config, problem.K.n, e)
            if i >= warmup:
                samples.append(report.wall_time)
    finally:
        _timing_lock.release()
    agg = np.median if aggregation == "median" else np.mean
    report.timings = samples
    report.wall_time = float(agg(samples))
    report.standard_error = standard_error(report.solution, problem.u)
    return report


@dataclass
class CategoryStats:
    problems: int
    time_ms: float  # mean over problems of the per-problem aggregate
    mean_se: float
    converged: bool
    mean_iterations: float
    mean_factor_nnz: float | None
    fallbacks: int


@dataclass
class BenchRow:
    config: SolverConfig
    categories: dict[str, CategoryStats] = field(default_factory=dict)

    @property
    def module(self) -> str:
        return MODULES[self.config.method]

    @property
    def mean_se(self) -> float:
        n = sum(c.problems for c in self.categories.values())
        return sum(c.mean_se * c.problems for c in self.categories.values()) / n

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.categories.values())

    def time_cell(self, category: str) -> str:
        c = self.categories.get(category)
        if c is None:
            return ""
        return f"{c.time_ms:.3f}" if c.converged else "-"


@dataclass
class BenchResult:
    rows: list[BenchRow]
    categories: tuple[str, ...]

    def header(self) -> list[str]:
        return (
            ["module", "method", "preconditioner/ordering"]
            + [f"{c} (ms)" for c in self.categories]
            + ["mean SE", "converged", "mean iterations"]
        )

    def records(self) -> list[list[str]]:
        out = []
        for r in self.rows:
            its = [c.mean_iterations for c in r.categories.values()]
            out.append(
                [r.module, r.config.method, r.config.variant]
                + [r.time_cell(c) for c in self.categories]
                + [f"{r.mean_se:.3e}", "yes" if r.converged else "no", f"{np.mean(its):.1f}"]
            )
        return out

    def to_tsv(self) -> str:
        lines = ["\t".join(self.header())] + ["\t".join(rec) for rec in self.records()]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        rows = [self.header()] + self.records()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        fmt = lambda r: "  ".join(v.ljust(w) if i < 3 else v.rjust(w) for i, (v, w) in enumerate(zip(r, widths)))  # noqa: E731
        lines = [fmt(rows[0]), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows[1:]]
        return "\n".join(line.rstrip() for line in lines) + "\n"

    def write(self, out_dir, stem: str = "bench") -> tuple[Path, Path]:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        tsv, txt = d / f"{stem}.tsv", d / f"{stem}.txt"
        tsv.write_text(self.to_tsv(), encoding="utf-8")
        txt.write_text(self.to_table(), encoding="utf-8")
        return tsv, txt


def load_problem_set(root, limit: int | None = None, verify_checksums: bool = True) -> dict[str, list[Problem]]:
    """Problems under ``root`` grouped by size category (at most ``limit`` each)."""
    out: dict[str, list[Problem]] = {}
    for d in find_problem_dirs(root):
        p = import_problem(d, verify_checksums)
        group = out.setdefault(p.meta.category, [])
        if limit is None or len(group) < limit:
            group.append(p)
    return out


def run_benchmark(config: BenchConfig, problems: dict[str, list[Problem]], progress=None) -> BenchResult:
    problems = {c: list(ps) for c, ps in problems.items() if ps}
    if not problems:
        raise BenchError("empty problem set")
    order = [c for c in CATEGORIES if c in problems] + sorted(c for c in problems if c not in CATEGORIES)
    rows = []
    for sc in config.solvers:
        row = BenchRow(sc)
        for cat in order:
            reports = []
            for p in problems[cat]:
                reports.append(time_solver(p, sc, config.repetitions, config.warmup, config.aggregation))
                if progress is not None:
                    progress(sc, cat, reports[-1])
            se = np.array([r.standard_error for r in reports])
            mean_se = float(se.mean())
            nnz = [r.factor_nnz for r in reports if r.factor_nnz is not None]
            row.categories[cat] = CategoryStats(
                problems=len(reports),
                time_ms=float(np.mean([r.wall_time for r in reports])) * 1e3,
                mean_se=mean_se,
                converged=bool(mean_se < CONVERGENCE_SE),
                mean_iterations=float(np.mean([r.iterations for r in reports])),
                mean_factor_nnz=float(np.mean(nnz)) if nnz else None,
                fallbacks=sum(1 for r in reports if r.fallback),
            )
        rows.append(row)
    return BenchResult(rows, tuple(order))
