# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse Cholesky kernels (up-looking factorization).

Mirrors lapgm._chol_py function-for-function; see that module for the
storage conventions.  Only inner loops differ: these run without the GIL.
"""

from libc.math cimport sqrt, isfinite

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t
ctypedef cnp.float64_t val_t


def etree(Py_ssize_t n, idx_t[::1] Ap, idx_t[::1] Ai):
    parent_arr = np.full(n, -1, dtype=np.int64)
    ancestor_arr = np.full(n, -1, dtype=np.int64)
    cdef idx_t[::1] parent = parent_arr
    cdef idx_t[::1] ancestor = ancestor_arr
    cdef Py_ssize_t k, p
    cdef idx_t i, nxt
    with nogil:
        for k in range(n):
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                while i != -1 and i < k:
                    nxt = ancestor[i]
                    ancestor[i] = k
                    if nxt == -1:
                        parent[i] = k
                    i = nxt
    return parent_arr


def symbolic(Py_ssize_t n, idx_t[::1] Ap, idx_t[::1] Ai):
    parent_arr = etree(n, Ap, Ai)
    cdef idx_t[::1] parent = parent_arr
    mark_arr = np.full(n, -1, dtype=np.int64)
    cdef idx_t[::1] mark = mark_arr
    counts_arr = np.ones(n, dtype=np.int64)
    cdef idx_t[::1] counts = counts_arr
    # stack layout per cs_ereach: fresh paths are pushed below older ones so a
    # top-to-bottom read is a topological order of the reach set
    stack_arr = np.zeros(n if n else 1, dtype=np.int64)
    cdef idx_t[::1] stack = stack_arr
    rowptr_arr = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] rowptr = rowptr_arr

    cdef Py_ssize_t k, p, top, length, pos
    cdef idx_t i
    cdef Py_ssize_t total = 0
    # first pass: column counts and rowptr sizes
    with nogil:
        for k in range(n):
            mark[k] = k
            top = n
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                if i >= k:
                    continue
                length = 0
                while mark[i] != k:
                    stack[length] = i
                    length += 1
                    mark[i] = k
                    i = parent[i]
                while length > 0:
                    length -= 1
                    top -= 1
                    stack[top] = stack[length]
            for p in range(top, n):
                counts[stack[p]] += 1
            total += n - top
            rowptr[k + 1] = total

    Lp_arr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts_arr, out=Lp_arr[1:])
    cdef idx_t[::1] Lp = Lp_arr
    nnz = int(Lp_arr[n])
    Li_arr = np.zeros(nnz, dtype=np.int64)
    cdef idx_t[::1] Li = Li_arr
    rowidx_arr = np.zeros(max(total, 1), dtype=np.int64)
    cdef idx_t[::1] rowidx = rowidx_arr
    cfill_arr = Lp_arr[:n].copy()
    cdef idx_t[::1] cfill = cfill_arr

    # second pass: fill Li (insertion order = increasing row) and rowidx
    mark_arr.fill(-1)
    cdef Py_ssize_t q
    cdef idx_t j
    pos = 0
    with nogil:
        for k in range(n):
            mark[k] = k
            top = n
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                if i >= k:
                    continue
                length = 0
                while mark[i] != k:
                    stack[length] = i
                    length += 1
                    mark[i] = k
                    i = parent[i]
                while length > 0:
                    length -= 1
                    top -= 1
                    stack[top] = stack[length]
            Li[cfill[k]] = k
            cfill[k] += 1
            for q in range(top, n):
                j = stack[q]
                Li[cfill[j]] = k
                cfill[j] += 1
                rowidx[pos] = j
                pos += 1
    return parent_arr, Lp_arr, Li_arr, rowptr_arr, rowidx_arr


def numeric(idx_t[::1] Ap, idx_t[::1] Ai, val_t[::1] Ax,
            idx_t[::1] Lp, idx_t[::1] Li,
            idx_t[::1] rowptr, idx_t[::1] rowidx, val_t[::1] Lx):
    cdef Py_ssize_t n = Ap.shape[0] - 1
    x_arr = np.zeros(n)
    cdef val_t[::1] x = x_arr
    cfill_arr = np.asarray(Lp[:n]) + 1
    cdef idx_t[::1] cfill = cfill_arr
    cdef Py_ssize_t k, p, q
    cdef idx_t i, j
    cdef val_t d, lkj
    cdef Py_ssize_t bad = -1
    with nogil:
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
            if d <= 0.0 or not isfinite(d):
                bad = k
                break
            Lx[Lp[k]] = sqrt(d)
    return bad


def lsolve(idx_t[::1] Lp, idx_t[::1] Li, val_t[::1] Lx, val_t[::1] x):
    cdef Py_ssize_t n = Lp.shape[0] - 1
    cdef Py_ssize_t j, p
    cdef val_t xj
    with nogil:
        for j in range(n):
            xj = x[j] / Lx[Lp[j]]
            x[j] = xj
            for p in range(Lp[j] + 1, Lp[j + 1]):
                x[Li[p]] -= Lx[p] * xj


def ltsolve(idx_t[::1] Lp, idx_t[::1] Li, val_t[::1] Lx, val_t[::1] x):
    cdef Py_ssize_t n = Lp.shape[0] - 1
    cdef Py_ssize_t j, p
    cdef val_t s
    with nogil:
        for j in range(n - 1, -1, -1):
            s = x[j]
            for p in range(Lp[j] + 1, Lp[j + 1]):
                s -= Lx[p] * x[Li[p]]
            x[j] = s / Lx[Lp[j]]


def inv_diag(idx_t[::1] parent, idx_t[::1] Lp, idx_t[::1] Li, val_t[::1] Lx,
             val_t[::1] out):
    cdef Py_ssize_t n = Lp.shape[0] - 1
    y_arr = np.zeros(n)
    cdef val_t[::1] y = y_arr
    cdef Py_ssize_t s, p
    cdef idx_t j
    cdef val_t yj, acc
    with nogil:
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
