from __future__ import annotations

import time

import numpy as np

from ..sparse import SparseSpd
from .precond import Preconditioner, build_preconditioner
from .report import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    NotPositiveDefinite,
    SolveReport,
    standard_error,
)


def pcg(
    K: SparseSpd,
    f,
    M: Preconditioner,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    callback=None,
):
    """Preconditioned CG from a zero initial guess.

    Stops once the true residual ``||f - K x|| / ||f||`` (recomputed each
    iteration, not the recurrence) drops to ``tolerance``. Returns
    ``(x, iterations, relative residual, converged)``.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    n = K.n
    x = np.zeros(n)
    norm_f = np.linalg.norm(f)
    if norm_f == 0.0:
        return x, 0, 0.0, True
    r = f.copy()
    z = M.apply(r)
    p = z.copy()
    rz = r @ z
    Ap = np.empty(n)
    Kx = np.empty(n)
    res = 1.0
    for it in range(1, max_iterations + 1):
        K.matvec(p, out=Ap)
        pAp = p @ Ap
        if not pAp > 0.0:
            raise NotPositiveDefinite(f"CG breakdown: p'Kp = {pAp:g} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        K.matvec(x, out=Kx)
        res = np.linalg.norm(f - Kx) / norm_f
        if res <= tolerance:
            return x, it, float(res), True
        z = M.apply(r)
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, max_iterations, float(res), False


def cg_solve(
    K: SparseSpd,
    f,
    preconditioner: str | Preconditioner = "none",
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    omega: float = 1.0,
    reference=None,
    callback=None,
) -> SolveReport:
    """Build the preconditioner and run PCG; both phases are timed."""
    t0 = time.perf_counter()
    M = build_preconditioner(K, preconditioner, omega) if isinstance(preconditioner, str) else preconditioner
    x, its, res, ok = pcg(K, f, M, tolerance, max_iterations, callback)
    elapsed = time.perf_counter() - t0
    name = preconditioner if isinstance(preconditioner, str) else M.kind
    if name == "ssor" and omega != 1.0:
        name = f"ssor({omega:g})"
    return SolveReport(
        solution=x,
        iterations=its,
        residual=res,
        standard_error=None if reference is None else standard_error(x, reference),
        wall_time=elapsed,
        converged=ok,
        method="cg",
        variant=name,
        fallback=M.fallback,
    )
