"""Simplicial sparse Cholesky ``P K P' = L L'``.

The symbolic phase depends only on the sparsity pattern and the ordering
and can be reused for any matrix with the same pattern. The numeric phase
is an up-looking factorization: row ``k`` of ``L`` is found by a sparse
triangular solve whose pattern is the row subtree of the elimination tree.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numba
import numpy as np

from ..sparse import SparseSpd
from .ordering import compute_ordering
from .report import NotPositiveDefinite, SolveReport, relative_residual, standard_error


@numba.njit(cache=True)
def _etree(indptr, indices, n):
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(indptr[k], indptr[k + 1]):
            i = indices[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


@numba.njit(cache=True)
def _ereach(indptr, indices, k, parent, s, flag):
    """Pattern of row k of L (excluding the diagonal) in ``s[top:]``."""
    n = len(s)
    top = n
    flag[k] = k
    for p in range(indptr[k], indptr[k + 1]):
        i = indices[p]
        if i > k:
            continue
        ln = 0
        while flag[i] != k:
            s[ln] = i
            ln += 1
            flag[i] = k
            i = parent[i]
        while ln > 0:
            top -= 1
            ln -= 1
            s[top] = s[ln]
    return top


@numba.njit(cache=True)
def _colcounts(indptr, indices, parent, n):
    counts = np.ones(n, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach(indptr, indices, k, parent, s, flag)
        for t in range(top, n):
            counts[s[t]] += 1
    return counts


@numba.njit(cache=True)
def _numeric(indptr, indices, data, parent, Lp):
    n = len(Lp) - 1
    Li = np.empty(Lp[n], dtype=np.int64)
    Lx = np.empty(Lp[n], dtype=np.float64)
    c = Lp[:n].copy()
    x = np.zeros(n)
    s = np.empty(n, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach(indptr, indices, k, parent, s, flag)
        x[k] = 0.0
        for p in range(indptr[k], indptr[k + 1]):
            if indices[p] <= k:
                x[indices[p]] = data[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
        if d <= 0.0 or not np.isfinite(d):
            return Li, Lx, k
        p = c[k]
        c[k] += 1
        Li[p] = k
        Lx[p] = np.sqrt(d)
    return Li, Lx, -1


@numba.njit(cache=True)
def _lsolve(Lp, Li, Lx, x):
    n = len(Lp) - 1
    for j in range(n):
        x[j] /= Lx[Lp[j]]
        xj = x[j]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            x[Li[p]] -= Lx[p] * xj
    return x


@numba.njit(cache=True)
def _ltsolve(Lp, Li, Lx, x):
    n = len(Lp) - 1
    for j in range(n - 1, -1, -1):
        s = x[j]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            s -= Lx[p] * x[Li[p]]
        x[j] = s / Lx[Lp[j]]
    return x


@dataclass(frozen=True)
class CholeskySymbolic:
    perm: np.ndarray
    parent: np.ndarray  # elimination tree of the permuted matrix
    Lp: np.ndarray  # column pointers of L
    # Lower triangle of the permuted matrix (CSR) and where each of its
    # values comes from in ``K.data``.
    indptr: np.ndarray
    indices: np.ndarray
    source: np.ndarray

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def nnz_l(self) -> int:
        return int(self.Lp[-1])


@dataclass(frozen=True)
class CholeskyFactor:
    symbolic: CholeskySymbolic
    Li: np.ndarray
    Lx: np.ndarray

    @property
    def nnz_l(self) -> int:
        return self.symbolic.nnz_l

    def solve(self, b) -> np.ndarray:
        sym = self.symbolic
        y = np.asarray(b, dtype=np.float64)[sym.perm].copy()
        _lsolve(sym.Lp, self.Li, self.Lx, y)
        _ltsolve(sym.Lp, self.Li, self.Lx, y)
        x = np.empty_like(y)
        x[sym.perm] = y
        return x

    def to_dense_l(self) -> np.ndarray:
        n = self.symbolic.n
        L = np.zeros((n, n))
        cols = np.repeat(np.arange(n), np.diff(self.symbolic.Lp))
        L[self.Li, cols] = self.Lx
        return L


def analyze(K: SparseSpd, ordering="amd") -> CholeskySymbolic:
    """Symbolic phase. ``ordering`` is a name or an explicit permutation."""
    perm = compute_ordering(K, ordering) if isinstance(ordering, str) else np.asarray(ordering, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(K.n)):
        raise ValueError("ordering is not a permutation")
    pinv = np.empty(K.n, dtype=np.int64)
    pinv[perm] = np.arange(K.n)
    r = pinv[K.rows()]
    c = pinv[K.indices]
    keep = np.flatnonzero(c <= r)
    order = np.lexsort((c[keep], r[keep]))
    source = keep[order]
    rows, cols = r[source], c[source]
    indptr = np.zeros(K.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=K.n), out=indptr[1:])
    indices = np.ascontiguousarray(cols)
    parent = _etree(indptr, indices, K.n)
    counts = _colcounts(indptr, indices, parent, K.n)
    Lp = np.zeros(K.n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    return CholeskySymbolic(perm, parent, Lp, indptr, indices, source)


def factorize(K: SparseSpd, symbolic: CholeskySymbolic) -> CholeskyFactor:
    data = np.ascontiguousarray(K.data[symbolic.source])
    Li, Lx, bad = _numeric(symbolic.indptr, symbolic.indices, data, symbolic.parent, symbolic.Lp)
    if bad >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at permuted column {bad}")
    return CholeskyFactor(symbolic, Li, Lx)


def cholesky(K: SparseSpd, ordering="amd") -> CholeskyFactor:
    return factorize(K, analyze(K, ordering))


def sparse_cholesky_solve(K: SparseSpd, f, ordering="amd", reference=None) -> SolveReport:
    f = np.asarray(f, dtype=np.float64)
    t0 = time.perf_counter()
    factor = cholesky(K, ordering)
    x = factor.solve(f)
    elapsed = time.perf_counter() - t0
    res = relative_residual(K, x, f)
    return SolveReport(
        solution=x,
        iterations=0,
        residual=res,
        standard_error=None if reference is None else standard_error(x, reference),
        wall_time=elapsed,
        converged=True,
        method="cholesky",
        variant=ordering if isinstance(ordering, str) else "custom",
        factor_nnz=factor.nnz_l,
    )
