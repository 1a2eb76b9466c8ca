"""Compressed sparse row storage for symmetric matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@numba.njit(cache=True)
def _spmv(indptr, indices, data, x, out):
    n = len(indptr) - 1
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += data[p] * x[indices[p]]
        out[i] = s
    return out


@dataclass(frozen=True, eq=False)
class SparseSpd:
    """Full (both triangles) CSR storage of a symmetric matrix.

    Column indices are sorted and unique within each row.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def matvec(self, x, out=None) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if out is None:
            out = np.empty(self.n)
        return _spmv(self.indptr, self.indices, self.data, x, out)

    __matmul__ = matvec

    def diagonal(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        d = np.zeros(self.n)
        on = rows == self.indices
        d[rows[on]] = self.data[on]
        return d

    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def lower(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lower triangle (diagonal last in each row) as CSR arrays."""
        rows = self.rows()
        keep = self.indices <= rows
        counts = np.bincount(rows[keep], minlength=self.n)
        indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return indptr, self.indices[keep].copy(), self.data[keep].copy()

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.rows(), self.indices] = self.data
        return a

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        return csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def is_symmetric(self) -> bool:
        rows = self.rows()
        key = rows * self.n + self.indices
        tkey = self.indices * self.n + rows
        order = np.argsort(tkey, kind="stable")
        return bool(np.array_equal(key, tkey[order]) and np.array_equal(self.data, self.data[order]))

    def permute(self, perm) -> "SparseSpd":
        """Return ``P K P'`` where row ``i`` of the result is row ``perm[i]`` of K."""
        perm = np.asarray(perm, dtype=np.int64)
        pinv = np.empty_like(perm)
        pinv[perm] = np.arange(self.n)
        return from_triplets(self.n, pinv[self.rows()], pinv[self.indices], self.data)

    def __eq__(self, other):
        if not isinstance(other, SparseSpd):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )


def from_triplets(n: int, rows, cols, vals) -> SparseSpd:
    """Build CSR from (possibly repeated) entries, summing duplicates."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    key = rows * n + cols
    uniq, inv = np.unique(key, return_inverse=True)
    data = np.bincount(inv, weights=vals, minlength=len(uniq))
    r = uniq // n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    return SparseSpd(n, indptr, (uniq % n).astype(np.int64), data)


def from_lower_triplets(n: int, rows, cols, vals) -> SparseSpd:
    """Sum lower-triangle entries (row >= col) and mirror them exactly."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if np.any(rows < cols):
        raise ValueError("entries must lie in the lower triangle")
    low = from_triplets(n, rows, cols, vals)
    lr = low.rows()
    off = lr != low.indices
    return from_triplets(
        n,
        np.concatenate([lr, low.indices[off]]),
        np.concatenate([low.indices, lr[off]]),
        np.concatenate([low.data, low.data[off]]),
    )


def from_dense(a) -> SparseSpd:
    a = np.asarray(a, dtype=float)
    r, c = np.nonzero(a)
    return from_triplets(a.shape[0], r, c, a[r, c])
