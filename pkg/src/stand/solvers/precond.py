"""Preconditioners ``z = M^-1 r`` for conjugate gradient.

Incomplete factorizations keep exactly the pattern of K (lower triangle for
IC(0), full pattern for ILU(0)). When they hit a non-positive or zero
pivot they are replaced by Jacobi and the substitution is recorded in
``fallback``.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np

from ..sparse import SparseSpd
from .report import NotPositiveDefinite


@numba.njit(cache=True)
def _diag_positions(indptr, indices):
    n = len(indptr) - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                pos[i] = p
                break
    return pos


@numba.njit(cache=True)
def _ic0(indptr, indices, data):
    """IC(0) on a lower-triangle CSR with the diagonal last in each row."""
    n = len(indptr) - 1
    L = data.copy()
    w = np.zeros(n)
    mark = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            mark[indices[p]] = i
            w[indices[p]] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            s = data[p]
            for q in range(indptr[k], indptr[k + 1] - 1):
                j = indices[q]
                if mark[j] == i:
                    s -= L[q] * w[j]
            if k < i:
                v = s / L[indptr[k + 1] - 1]
                L[p] = v
                w[k] = v
            else:
                if s <= 0.0 or not np.isfinite(s):
                    return L, i
                L[p] = np.sqrt(s)
    return L, -1


@numba.njit(cache=True)
def _lower_solve_apply(indptr, indices, L, r, out):
    """out = (L L')^-1 r for a lower CSR factor with diagonal last."""
    n = len(indptr) - 1
    for i in range(n):
        s = r[i]
        end = indptr[i + 1] - 1
        for p in range(indptr[i], end):
            s -= L[p] * out[indices[p]]
        out[i] = s / L[end]
    for i in range(n - 1, -1, -1):
        end = indptr[i + 1] - 1
        out[i] /= L[end]
        xi = out[i]
        for p in range(indptr[i], end):
            out[indices[p]] -= L[p] * xi
    return out


@numba.njit(cache=True)
def _ilu0(indptr, indices, data, diag):
    n = len(indptr) - 1
    a = data.copy()
    col_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            col_pos[indices[p]] = p
        for p in range(indptr[i], diag[i]):
            k = indices[p]
            piv = a[diag[k]]
            if piv == 0.0:
                return a, k
            a[p] /= piv
            lik = a[p]
            for q in range(diag[k] + 1, indptr[k + 1]):
                pos = col_pos[indices[q]]
                if pos >= 0:
                    a[pos] -= lik * a[q]
        for p in range(indptr[i], indptr[i + 1]):
            col_pos[indices[p]] = -1
        if a[diag[i]] == 0.0 or not np.isfinite(a[diag[i]]):
            return a, i
    return a, -1


@numba.njit(cache=True)
def _ilu_apply(indptr, indices, a, diag, r, out):
    n = len(indptr) - 1
    for i in range(n):
        s = r[i]
        for p in range(indptr[i], diag[i]):
            s -= a[p] * out[indices[p]]
        out[i] = s
    for i in range(n - 1, -1, -1):
        s = out[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= a[p] * out[indices[p]]
        out[i] = s / a[diag[i]]
    return out


@numba.njit(cache=True)
def _ssor_apply(indptr, indices, data, diag, omega, r, out):
    n = len(indptr) - 1
    for i in range(n):
        s = r[i]
        for p in range(indptr[i], diag[i]):
            s -= data[p] * out[indices[p]]
        out[i] = s * omega / data[diag[i]]
    for i in range(n):
        out[i] *= data[diag[i]]
    for i in range(n - 1, -1, -1):
        s = out[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= data[p] * out[indices[p]]
        out[i] = s * omega / data[diag[i]]
    scale = (2.0 - omega) / omega
    for i in range(n):
        out[i] *= scale
    return out


class Preconditioner:
    kind = "none"
    fallback: str | None = None

    def apply(self, r):
        return np.array(r, dtype=float, copy=True)

    __call__ = apply


class Identity(Preconditioner):
    pass


class Jacobi(Preconditioner):
    kind = "jacobi"

    def __init__(self, K: SparseSpd):
        d = K.diagonal()
        if np.any(d <= 0):
            raise NotPositiveDefinite("non-positive diagonal entry")
        self.inv_diag = 1.0 / d

    def apply(self, r):
        return self.inv_diag * r


class SSOR(Preconditioner):
    """Symmetric SOR: ``M = w/(2-w) (D/w + L) D^-1 w (D/w + L')``."""

    kind = "ssor"

    def __init__(self, K: SparseSpd, omega: float = 1.0):
        if not 0 < omega < 2:
            raise ValueError("omega must lie in (0, 2)")
        self.K = K
        self.omega = float(omega)
        self.diag = _diag_positions(K.indptr, K.indices)
        if np.any(self.diag < 0) or np.any(K.data[self.diag] <= 0):
            raise NotPositiveDefinite("missing or non-positive diagonal entry")

    def apply(self, r):
        out = np.empty(self.K.n)
        return _ssor_apply(self.K.indptr, self.K.indices, self.K.data, self.diag, self.omega, np.ascontiguousarray(r), out)


class IC0(Preconditioner):
    kind = "ic0"

    def __init__(self, K: SparseSpd):
        self.indptr, self.indices, data = K.lower()
        L, bad = _ic0(self.indptr, self.indices, data)
        if bad >= 0:
            raise NotPositiveDefinite(f"IC(0) pivot breakdown in row {bad}")
        self.L = L

    def apply(self, r):
        out = np.empty(len(self.indptr) - 1)
        return _lower_solve_apply(self.indptr, self.indices, self.L, np.ascontiguousarray(r), out)


class ILU0(Preconditioner):
    kind = "ilu0"

    def __init__(self, K: SparseSpd):
        self.K = K
        self.diag = _diag_positions(K.indptr, K.indices)
        if np.any(self.diag < 0):
            raise NotPositiveDefinite("missing diagonal entry")
        a, bad = _ilu0(K.indptr, K.indices, K.data, self.diag)
        if bad >= 0:
            raise NotPositiveDefinite(f"ILU(0) zero pivot in row {bad}")
        self.a = a

    def apply(self, r):
        out = np.empty(self.K.n)
        return _ilu_apply(self.K.indptr, self.K.indices, self.a, self.diag, np.ascontiguousarray(r), out)


def build_preconditioner(K: SparseSpd, kind: str = "ic0", omega: float = 1.0) -> Preconditioner:
    kind = kind.lower()
    if kind == "none":
        return Identity()
    if kind == "jacobi":
        return Jacobi(K)
    if kind == "ssor":
        return SSOR(K, omega)
    if kind in ("ic0", "ilu0"):
        try:
            return IC0(K) if kind == "ic0" else ILU0(K)
        except NotPositiveDefinite as e:
            warnings.warn(f"{kind} failed ({e}); falling back to Jacobi", RuntimeWarning, stacklevel=2)
            pc = Jacobi(K)
            pc.fallback = f"{kind}->jacobi"
            return pc
    raise ValueError(f"unknown preconditioner {kind!r}")
