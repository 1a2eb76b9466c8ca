"""Matrix Market reader/writer for the two kinds the dataset uses.

Sparse symmetric matrices are written as ``coordinate real symmetric``
(lower triangle only, 1-based indices); vectors as ``array real general``
with a single column. Values use 17 significant digits so a write/read
round trip is exact.
"""

from __future__ import annotations

import os

import numpy as np

from .sparse import SparseSpd, from_lower_triplets, from_triplets

COORD_SYM = "%%MatrixMarket matrix coordinate real symmetric"
COORD_GEN = "%%MatrixMarket matrix coordinate real general"
ARRAY_GEN = "%%MatrixMarket matrix array real general"


class MatrixMarketError(ValueError):
    """Malformed or inconsistent Matrix Market content."""


def _fmt(v: float) -> str:
    return "%.17g" % v


def format_sparse(K: SparseSpd) -> str:
    indptr, indices, data = K.lower()
    rows = np.repeat(np.arange(K.n), np.diff(indptr)) + 1
    lines = [COORD_SYM, f"{K.n} {K.n} {len(data)}"]
    lines.extend(f"{r} {c} {_fmt(v)}" for r, c, v in zip(rows.tolist(), (indices + 1).tolist(), data.tolist()))
    return "\n".join(lines) + "\n"


def format_vector(x) -> str:
    x = np.asarray(x, dtype=float).ravel()
    lines = [ARRAY_GEN, f"{len(x)} 1"]
    lines.extend(_fmt(v) for v in x.tolist())
    return "\n".join(lines) + "\n"


def write_sparse(path, K: SparseSpd) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_sparse(K))


def write_vector(path, x) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_vector(x))


def _split(text: str, name: str) -> tuple[str, list[int], list[str]]:
    lines = text.split("\n")
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise MatrixMarketError(f"{name}: missing %%MatrixMarket banner")
    banner = " ".join(lines[0].lower().split())
    pos = 1
    while pos < len(lines) and (lines[pos].startswith("%") or not lines[pos].strip()):
        pos += 1
    if pos == len(lines):
        raise MatrixMarketError(f"{name}: missing size line")
    try:
        size = [int(t) for t in lines[pos].split()]
    except ValueError:
        raise MatrixMarketError(f"{name}: bad size line {lines[pos]!r}") from None
    tokens = " ".join(lines[pos + 1 :]).split()
    return banner, size, tokens


def parse(text: str, name: str = "<string>"):
    """Parse Matrix Market text into a ``SparseSpd`` or a 1-D array."""
    banner, size, tokens = _split(text, name)
    if banner == ARRAY_GEN.lower():
        if len(size) != 2:
            raise MatrixMarketError(f"{name}: array size line needs 2 integers")
        m, ncol = size
        if ncol != 1:
            raise MatrixMarketError(f"{name}: only single-column arrays are supported")
        if len(tokens) != m:
            raise MatrixMarketError(
                f"{name}: dimension mismatch: header declares {m} entries, found {len(tokens)}"
            )
        try:
            return np.array(tokens, dtype=float)
        except ValueError as e:
            raise MatrixMarketError(f"{name}: bad value ({e})") from None

    if banner not in (COORD_SYM.lower(), COORD_GEN.lower()):
        raise MatrixMarketError(f"{name}: unsupported kind {banner!r}")
    if len(size) != 3:
        raise MatrixMarketError(f"{name}: coordinate size line needs 3 integers")
    m, n, nnz = size
    if m != n:
        raise MatrixMarketError(f"{name}: matrix is not square ({m}x{n})")
    if len(tokens) != 3 * nnz:
        raise MatrixMarketError(
            f"{name}: dimension mismatch: header declares {nnz} entries, found {len(tokens) / 3:g}"
        )
    try:
        arr = np.array(tokens, dtype=float).reshape(nnz, 3)
    except ValueError as e:
        raise MatrixMarketError(f"{name}: bad value ({e})") from None
    rows = arr[:, 0].astype(np.int64) - 1
    cols = arr[:, 1].astype(np.int64) - 1
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise MatrixMarketError(f"{name}: index out of range")
    if banner == COORD_SYM.lower():
        if np.any(rows < cols):
            raise MatrixMarketError(f"{name}: symmetric file holds an upper-triangle entry")
        return from_lower_triplets(n, rows, cols, arr[:, 2])
    return from_triplets(n, rows, cols, arr[:, 2])


def read(path):
    with open(path, encoding="ascii") as fh:
        return parse(fh.read(), os.path.basename(str(path)))
