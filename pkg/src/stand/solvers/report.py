from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 1000

METHODS = ("cholesky", "cg")
ORDERING_NAMES = ("natural", "rcm", "amd")
PRECONDITIONER_NAMES = ("none", "jacobi", "ssor", "ic0", "ilu0")


class NotPositiveDefinite(ArithmeticError):
    """A pivot or curvature ``p'Kp`` was not positive."""


def standard_error(x_approx, x_ref) -> float:
    """``||x_ref - x_approx|| / ||x_ref||``."""
    x_approx = np.asarray(x_approx, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x_approx.shape != x_ref.shape:
        raise ValueError("vectors differ in length")
    ref = np.linalg.norm(x_ref)
    if ref == 0.0:
        raise ValueError("reference vector has zero norm")
    return float(np.linalg.norm(x_ref - x_approx) / ref)


def relative_residual(K, x, f) -> float:
    nf = np.linalg.norm(f)
    r = np.linalg.norm(f - K.matvec(x))
    return float(r / nf) if nf > 0 else float(r)


@dataclass
class SolveReport:
    solution: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    standard_error: float | None
    wall_time: float  # seconds
    converged: bool
    method: str = ""
    variant: str = ""
    factor_nnz: int | None = None
    fallback: str | None = None
    timings: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "variant": self.variant,
            "iterations": self.iterations,
            "residual": self.residual,
            "standard_error": self.standard_error,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "factor_nnz": self.factor_nnz,
            "fallback": self.fallback,
        }

    def format(self) -> str:
        se = "n/a" if self.standard_error is None else f"{self.standard_error:.3e}"
        lines = [
            f"method       {self.method} ({self.variant})",
            f"converged    {'yes' if self.converged else 'no'}",
            f"iterations   {self.iterations}",
            f"residual     {self.residual:.3e}",
            f"std error    {se}",
            f"time (ms)    {self.wall_time * 1e3:.3f}",
        ]
        if self.factor_nnz is not None:
            lines.append(f"nnz(L)       {self.factor_nnz}")
        if self.fallback:
            lines.append(f"fallback     {self.fallback}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cg"
    ordering: str = "amd"
    preconditioner: str = "ic0"
    omega: float = 1.0
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.ordering not in ORDERING_NAMES:
            raise ValueError(f"ordering must be one of {ORDERING_NAMES}")
        if self.preconditioner not in PRECONDITIONER_NAMES:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONER_NAMES}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.omega < 2:
            raise ValueError("omega must lie in (0, 2)")

    @property
    def variant(self) -> str:
        if self.method == "cholesky":
            return self.ordering
        if self.preconditioner == "ssor" and self.omega != 1.0:
            return f"ssor({self.omega:g})"
        return self.preconditioner

    @property
    def label(self) -> str:
        return f"{self.method}:{self.variant}"

    @classmethod
    def parse(cls, text: str, **overrides) -> "SolverConfig":
        """Parse ``cholesky:amd``, ``cg:ic0``, ``cg:ssor:1.4`` style labels."""
        parts = [p.strip().lower() for p in text.split(":") if p.strip()]
        if not parts:
            raise ValueError("empty solver label")
        method = parts[0]
        kw = dict(method=method)
        if method == "cholesky":
            if len(parts) > 1:
                kw["ordering"] = parts[1]
        elif method == "cg":
            kw["preconditioner"] = parts[1] if len(parts) > 1 else "none"
            if len(parts) > 2:
                kw["omega"] = float(parts[2])
        kw.update(overrides)
        return cls(**kw)
