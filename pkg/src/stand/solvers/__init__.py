"""Sparse SPD solvers: direct Cholesky with orderings, preconditioned CG."""

from .cg import cg_solve, pcg
from .cholesky import CholeskyFactor, CholeskySymbolic, analyze, cholesky, factorize, sparse_cholesky_solve
from .ordering import amd_ordering, bandwidth, compute_ordering, natural_ordering, rcm_ordering
from .precond import build_preconditioner
from .report import NotPositiveDefinite, SolveReport, SolverConfig, relative_residual, standard_error


def solve(K, f, config: SolverConfig, reference=None) -> SolveReport:
    if config.method == "cholesky":
        return sparse_cholesky_solve(K, f, config.ordering, reference=reference)
    return cg_solve(
        K,
        f,
        config.preconditioner,
        tolerance=config.tolerance,
        max_iterations=config.max_iterations,
        omega=config.omega,
        reference=reference,
    )


__all__ = [
    "CholeskyFactor",
    "CholeskySymbolic",
    "NotPositiveDefinite",
    "SolveReport",
    "SolverConfig",
    "amd_ordering",
    "analyze",
    "bandwidth",
    "build_preconditioner",
    "cg_solve",
    "cholesky",
    "compute_ordering",
    "factorize",
    "natural_ordering",
    "pcg",
    "rcm_ordering",
    "relative_residual",
    "solve",
    "sparse_cholesky_solve",
    "standard_error",
]
