"""Fill-reducing and bandwidth-reducing symmetric orderings.

A permutation ``perm`` lists old indices in their new order: row ``i`` of the
permuted matrix is row ``perm[i]`` of the original.
"""

from __future__ import annotations

import numba
import numpy as np

from ..sparse import SparseSpd


def natural_ordering(K: SparseSpd) -> np.ndarray:
    return np.arange(K.n, dtype=np.int64)


def bandwidth(K: SparseSpd, perm=None) -> int:
    if perm is None:
        rows, cols = K.rows(), K.indices
    else:
        pinv = np.empty(K.n, dtype=np.int64)
        pinv[np.asarray(perm)] = np.arange(K.n)
        rows, cols = pinv[K.rows()], pinv[K.indices]
    return int(np.abs(rows - cols).max()) if K.nnz else 0


# --------------------------------------------------------------------------
# Reverse Cuthill-McKee


@numba.njit(cache=True)
def _bfs_levels(root, indptr, indices, stamp, tag, queue, level):
    """Breadth-first level structure from ``root``; returns (count, eccentricity)."""
    queue[0] = root
    stamp[root] = tag
    level[root] = 0
    head, tail = 0, 1
    while head < tail:
        v = queue[head]
        head += 1
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if stamp[u] != tag:
                stamp[u] = tag
                level[u] = level[v] + 1
                queue[tail] = u
                tail += 1
    return tail, level[queue[tail - 1]]


@numba.njit(cache=True)
def _rcm(indptr, indices):
    n = len(indptr) - 1
    deg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] != i:
                deg[i] += 1
    visited = np.zeros(n, dtype=np.bool_)
    stamp = np.full(n, -1, dtype=np.int64)
    level = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    perm = np.empty(n, dtype=np.int64)
    tag = 0
    pos = 0
    for seed in range(n):
        if visited[seed]:
            continue
        # George-Liu pseudo-peripheral node search.
        root = seed
        count, ecc = _bfs_levels(root, indptr, indices, stamp, tag, queue, level)
        tag += 1
        while True:
            best = -1
            for t in range(count):
                v = queue[t]
                if level[v] == ecc and (best == -1 or deg[v] < deg[best] or (deg[v] == deg[best] and v < best)):
                    best = v
            count2, ecc2 = _bfs_levels(best, indptr, indices, stamp, tag, queue, level)
            tag += 1
            if ecc2 > ecc:
                root, ecc, count = best, ecc2, count2
            else:
                break

        start = pos
        perm[pos] = root
        visited[root] = True
        pos += 1
        head = start
        while head < pos:
            v = perm[head]
            head += 1
            first = pos
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if not visited[u]:
                    visited[u] = True
                    perm[pos] = u
                    pos += 1
            # insertion sort of the new level by (degree, index)
            for a in range(first + 1, pos):
                u = perm[a]
                b = a - 1
                while b >= first and (deg[perm[b]] > deg[u] or (deg[perm[b]] == deg[u] and perm[b] > u)):
                    perm[b + 1] = perm[b]
                    b -= 1
                perm[b + 1] = u
        perm[start:pos] = perm[start:pos][::-1].copy()
    return perm


def rcm_ordering(K: SparseSpd) -> np.ndarray:
    """Reverse Cuthill-McKee, each connected component reversed in place."""
    return _rcm(K.indptr, K.indices)


# --------------------------------------------------------------------------
# Approximate minimum degree (quotient graph, element absorption,
# mass elimination, supervariable detection by hashing).


@numba.njit(inline="always")
def _flip(i):
    return -i - 2


@numba.njit(cache=True)
def _wclear(mark, lemax, w, n):
    if mark < 2 or mark + lemax < 0:
        for k in range(n):
            if w[k] != 0:
                w[k] = 1
        mark = 2
    return mark


@numba.njit(cache=True)
def _tdfs(j, k, head, nxt, post, stack):
    top = 0
    stack[0] = j
    while top >= 0:
        p = stack[top]
        i = head[p]
        if i == -1:
            top -= 1
            post[k] = p
            k += 1
        else:
            head[p] = nxt[i]
            top += 1
            stack[top] = i
    return k


@numba.njit(cache=True)
def _amd(indptr, indices, n):
    # Off-diagonal pattern with elbow room.
    cnz = 0
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] != i:
                cnz += 1
    nzmax = cnz + cnz // 5 + 2 * n + 1
    Cp = np.empty(n + 1, dtype=np.int64)
    Ci = np.empty(nzmax, dtype=np.int64)
    q = 0
    for i in range(n):
        Cp[i] = q
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] != i:
                Ci[q] = indices[p]
                q += 1
    Cp[n] = q

    dense = max(16, int(10 * np.sqrt(n)))
    dense = min(n - 2, dense)

    ln_ = np.empty(n + 1, dtype=np.int64)
    nv = np.empty(n + 1, dtype=np.int64)
    nxt = np.empty(n + 1, dtype=np.int64)
    head = np.empty(n + 1, dtype=np.int64)
    elen = np.empty(n + 1, dtype=np.int64)
    degree = np.empty(n + 1, dtype=np.int64)
    w = np.empty(n + 1, dtype=np.int64)
    hhead = np.empty(n + 1, dtype=np.int64)
    last = np.empty(n + 1, dtype=np.int64)
    P = np.empty(n + 1, dtype=np.int64)

    for k in range(n):
        ln_[k] = Cp[k + 1] - Cp[k]
    ln_[n] = 0
    for i in range(n + 1):
        head[i] = -1
        last[i] = -1
        nxt[i] = -1
        hhead[i] = -1
        nv[i] = 1
        w[i] = 1
        elen[i] = 0
        degree[i] = ln_[i]
    mark = _wclear(0, 0, w, n)
    elen[n] = -2
    Cp[n] = -1
    w[n] = 0

    nel = 0
    mindeg = 0
    lemax = 0
    for i in range(n):
        d = degree[i]
        if d == 0:
            elen[i] = -2
            nel += 1
            Cp[i] = -1
            w[i] = 0
        elif d > dense:
            nv[i] = 0
            elen[i] = -1
            nel += 1
            Cp[i] = _flip(n)
            nv[n] += 1
        else:
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            head[d] = i

    while nel < n:
        # select a node of minimum approximate degree
        k = -1
        while mindeg < n:
            k = head[mindeg]
            if k != -1:
                break
            mindeg += 1
        if nxt[k] != -1:
            last[nxt[k]] = -1
        head[mindeg] = nxt[k]
        elenk = elen[k]
        nvk = nv[k]
        nel += nvk

        # garbage collection
        if elenk > 0 and cnz + mindeg >= nzmax:
            for j in range(n):
                p = Cp[j]
                if p >= 0:
                    Cp[j] = Ci[p]
                    Ci[p] = _flip(j)
            q = 0
            p = 0
            while p < cnz:
                j = _flip(Ci[p])
                p += 1
                if j >= 0:
                    Ci[q] = Cp[j]
                    Cp[j] = q
                    q += 1
                    for _ in range(ln_[j] - 1):
                        Ci[q] = Ci[p]
                        q += 1
                        p += 1
            cnz = q

        # construct the new element Lk
        dk = 0
        nv[k] = -nvk
        p = Cp[k]
        pk1 = p if elenk == 0 else cnz
        pk2 = pk1
        for k1 in range(1, elenk + 2):
            if k1 > elenk:
                e = k
                pj = p
                ln = ln_[k] - elenk
            else:
                e = Ci[p]
                p += 1
                pj = Cp[e]
                ln = ln_[e]
            for _ in range(ln):
                i = Ci[pj]
                pj += 1
                nvi = nv[i]
                if nvi <= 0:
                    continue
                dk += nvi
                nv[i] = -nvi
                Ci[pk2] = i
                pk2 += 1
                if nxt[i] != -1:
                    last[nxt[i]] = last[i]
                if last[i] != -1:
                    nxt[last[i]] = nxt[i]
                else:
                    head[degree[i]] = nxt[i]
            if e != k:
                Cp[e] = _flip(k)
                w[e] = 0
        if elenk != 0:
            cnz = pk2
        degree[k] = dk
        Cp[k] = pk1
        ln_[k] = pk2 - pk1
        elen[k] = -2

        # set differences |Le \ Lk|
        mark = _wclear(mark, lemax, w, n)
        for pk in range(pk1, pk2):
            i = Ci[pk]
            eln = elen[i]
            if eln <= 0:
                continue
            nvi = -nv[i]
            wnvi = mark - nvi
            for p in range(Cp[i], Cp[i] + eln):
                e = Ci[p]
                if w[e] >= mark:
                    w[e] -= nvi
                elif w[e] != 0:
                    w[e] = degree[e] + wnvi

        # approximate degree update
        for pk in range(pk1, pk2):
            i = Ci[pk]
            p1 = Cp[i]
            p2 = p1 + elen[i] - 1
            pn = p1
            h = 0
            d = 0
            for p in range(p1, p2 + 1):
                e = Ci[p]
                if w[e] != 0:
                    dext = w[e] - mark
                    if dext > 0:
                        d += dext
                        Ci[pn] = e
                        pn += 1
                        h += e
                    else:
                        Cp[e] = _flip(k)  # aggressive absorption
                        w[e] = 0
            elen[i] = pn - p1 + 1
            p3 = pn
            p4 = p1 + ln_[i]
            for p in range(p2 + 1, p4):
                j = Ci[p]
                nvj = nv[j]
                if nvj <= 0:
                    continue
                d += nvj
                Ci[pn] = j
                pn += 1
                h += j
            if d == 0:
                # mass elimination
                Cp[i] = _flip(k)
                nvi = -nv[i]
                dk -= nvi
                nvk += nvi
                nel += nvi
                nv[i] = 0
                elen[i] = -1
            else:
                degree[i] = min(degree[i], d)
                Ci[pn] = Ci[p3]
                Ci[p3] = Ci[p1]
                Ci[p1] = k
                ln_[i] = pn - p1 + 1
                h = h % n
                nxt[i] = hhead[h]
                hhead[h] = i
                last[i] = h
        degree[k] = dk
        lemax = max(lemax, dk)
        mark = _wclear(mark + lemax, lemax, w, n)

        # supervariable detection
        for pk in range(pk1, pk2):
            i = Ci[pk]
            if nv[i] >= 0:
                continue
            h = last[i]
            i = hhead[h]
            hhead[h] = -1
            while i != -1 and nxt[i] != -1:
                ln = ln_[i]
                eln = elen[i]
                for p in range(Cp[i] + 1, Cp[i] + ln):
                    w[Ci[p]] = mark
                jlast = i
                j = nxt[i]
                while j != -1:
                    ok = ln_[j] == ln and elen[j] == eln
                    p = Cp[j] + 1
                    while ok and p <= Cp[j] + ln - 1:
                        if w[Ci[p]] != mark:
                            ok = False
                        p += 1
                    if ok:
                        Cp[j] = _flip(i)
                        nv[i] += nv[j]
                        nv[j] = 0
                        elen[j] = -1
                        j = nxt[j]
                        nxt[jlast] = j
                    else:
                        jlast = j
                        j = nxt[j]
                i = nxt[i]
                mark += 1

        # finalize Lk and reinsert its variables into the degree lists
        p = pk1
        for pk in range(pk1, pk2):
            i = Ci[pk]
            nvi = -nv[i]
            if nvi <= 0:
                continue
            nv[i] = nvi
            d = degree[i] + dk - nvi
            d = min(d, n - nel - nvi)
            if head[d] != -1:
                last[head[d]] = i
            nxt[i] = head[d]
            last[i] = -1
            head[d] = i
            mindeg = min(mindeg, d)
            degree[i] = d
            Ci[p] = i
            p += 1
        nv[k] = nvk
        ln_[k] = p - pk1
        if ln_[k] == 0:
            Cp[k] = -1
            w[k] = 0
        if elenk != 0:
            cnz = p

    # postorder the assembly tree
    for i in range(n):
        Cp[i] = _flip(Cp[i])
    for j in range(n + 1):
        head[j] = -1
    for j in range(n, -1, -1):
        if nv[j] > 0:
            continue
        nxt[j] = head[Cp[j]]
        head[Cp[j]] = j
    for e in range(n, -1, -1):
        if nv[e] <= 0:
            continue
        if Cp[e] != -1:
            nxt[e] = head[Cp[e]]
            head[Cp[e]] = e
    k = 0
    for i in range(n + 1):
        if Cp[i] == -1:
            k = _tdfs(i, k, head, nxt, P, w)
    return P[:n].copy()


def amd_ordering(K: SparseSpd) -> np.ndarray:
    """Approximate minimum degree ordering of the symmetric pattern of K."""
    if K.n <= 2:
        return natural_ordering(K)
    return _amd(K.indptr, K.indices, K.n)


ORDERINGS = {
    "natural": natural_ordering,
    "rcm": rcm_ordering,
    "amd": amd_ordering,
}


def compute_ordering(K: SparseSpd, name: str) -> np.ndarray:
    try:
        return ORDERINGS[name.lower()](K)
    except KeyError:
        raise ValueError(f"unknown ordering {name!r}; choose from {sorted(ORDERINGS)}") from None
