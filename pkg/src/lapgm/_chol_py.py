"""Pure-Python sparse Cholesky kernels.

Same call signatures as the compiled module ``lapgm._chol_c``; one of the two
is picked at import time by :mod:`lapgm._kernels`.  The factorization is the
classic up-looking algorithm: for each row k solve the triangular system
against the already-computed leading factor, with row patterns supplied by a
prior symbolic pass over the elimination tree.

All matrices are in compressed sparse column form.  ``Ap, Ai, Ax`` hold the
upper triangle of the symmetric input (rows sorted, diagonal present).  The
factor ``L`` is lower triangular, stored column-wise with the diagonal entry
first in every column followed by sub-diagonal rows in increasing order.
"""

import math

import numpy as np


def etree(n, Ap, Ai):
    """Elimination tree of a symmetric matrix given its upper triangle."""
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            # walk up from i with path compression until we pass k
            while i != -1 and i < k:
                nxt = ancestor[i]
                ancestor[i] = k
                if nxt == -1:
                    parent[i] = k
                i = nxt
    return parent


def symbolic(n, Ap, Ai):
    """Symbolic factorization: pattern of L plus per-row elimination reach.

    Returns ``(parent, Lp, Li, rowptr, rowidx)`` where column j of L occupies
    ``Li[Lp[j]:Lp[j+1]]`` (diagonal first) and the off-diagonal pattern of row
    k, in topological order for the row solve, is ``rowidx[rowptr[k]:rowptr[k+1]]``.
    """
    parent = etree(n, Ap, Ai)
    mark = np.full(n, -1, dtype=np.int64)
    counts = np.ones(n, dtype=np.int64)  # diagonal of every column
    reaches = []
    for k in range(n):
        mark[k] = k
        reach = []
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i >= k:
                continue
            path = []
            while mark[i] != k:
                path.append(i)
                mark[i] = k
                i = parent[i]
            # deeper nodes first, discovered paths in front of older ones:
            # that is a topological order of the reach set
            reach = path + reach
        for j in reach:
            counts[j] += 1
        reaches.append(reach)

    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    nnz = int(Lp[n])
    Li = np.zeros(nnz, dtype=np.int64)
    cfill = Lp[:n].copy()
    rowptr = np.zeros(n + 1, dtype=np.int64)
    rowidx = np.zeros(nnz - n, dtype=np.int64)
    pos = 0
    for k in range(n):
        Li[cfill[k]] = k  # diagonal slot
        cfill[k] += 1
        for j in reaches[k]:
            Li[cfill[j]] = k
            cfill[j] += 1
            rowidx[pos] = j
            pos += 1
        rowptr[k + 1] = pos
    return parent, Lp, Li, rowptr, rowidx


def numeric(Ap, Ai, Ax, Lp, Li, rowptr, rowidx, Lx):
    """Numeric up-looking factorization into preallocated Lx.

    Returns -1 on success, else the index of the first non-positive pivot.
    """
    n = Ap.shape[0] - 1
    x = np.zeros(n)
    cfill = Lp[:n] + 1  # next free slot per column (diagonal slot reserved)
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i <= k:
                x[i] = Ax[p]
        d = x[k]
        x[k] = 0.0
        for q in range(rowptr[k], rowptr[k + 1]):
            j = rowidx[q]
            lkj = x[j] / Lx[Lp[j]]
            x[j] = 0.0
            for p in range(Lp[j] + 1, cfill[j]):
                x[Li[p]] -= Lx[p] * lkj
            d -= lkj * lkj
            Lx[cfill[j]] = lkj
            cfill[j] += 1
        if d <= 0.0 or not math.isfinite(d):
            return k
        Lx[Lp[k]] = math.sqrt(d)
    return -1


def lsolve(Lp, Li, Lx, x):
    """In-place forward solve L y = x."""
    n = Lp.shape[0] - 1
    for j in range(n):
        xj = x[j] / Lx[Lp[j]]
        x[j] = xj
        for p in range(Lp[j] + 1, Lp[j + 1]):
            x[Li[p]] -= Lx[p] * xj


def ltsolve(Lp, Li, Lx, x):
    """In-place backward solve L' y = x."""
    n = Lp.shape[0] - 1
    for j in range(n - 1, -1, -1):
        s = x[j]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            s -= Lx[p] * x[Li[p]]
        x[j] = s / Lx[Lp[j]]


def inv_diag(parent, Lp, Li, Lx, out):
    """Diagonal of the inverse: out[s] = || L^{-1} e_s ||^2.

    The nonzero pattern of L^{-1} e_s is s plus its elimination-tree
    ancestors, so each solve walks the parent chain only.
    """
    n = Lp.shape[0] - 1
    y = np.zeros(n)
    for s in range(n):
        y[s] = 1.0
        acc = 0.0
        j = s
        while j != -1:
            yj = y[j] / Lx[Lp[j]]
            y[j] = 0.0
            acc += yj * yj
            for p in range(Lp[j] + 1, Lp[j + 1]):
                y[Li[p]] -= Lx[p] * yj
            j = parent[j]
        out[s] = acc
