"""Symmetric sparse matrices in canonical upper-triangle storage, and a
sparse Cholesky-based solver layer on top of the factorization kernels.

A :class:`SparsePrecision` stores one entry per (row <= col) position, sorted
by column then row, duplicates summed.  Triplet input refers to the symmetric
matrix: an off-diagonal contribution ``(r, c, v)`` lands in both mirror
positions of the dense equivalent.

Factorization is split into a symbolic phase (:class:`CholeskyContext`) that
depends only on the pattern and a numeric phase (:meth:`CholeskyContext.factor`).
Re-factorizing a matrix with the same pattern reuses the analysis, which is
the common case when the same precision structure is assembled for many
hyperparameter values.
"""

import numpy as np

from . import _kernels
from .errors import NotPositiveDefiniteError
from .ordering import minimum_degree, natural_order


def _canonicalize(dim, rows, cols, vals):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.shape != cols.shape or rows.shape != vals.shape:
        raise ValueError("triplet arrays must have equal length")
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= dim or cols.max() >= dim):
        raise ValueError("triplet index out of range")
    r = np.minimum(rows, cols)
    c = np.maximum(rows, cols)
    keys = c * dim + r
    uniq, inverse = np.unique(keys, return_inverse=True)
    merged = np.bincount(inverse, weights=vals, minlength=uniq.size)
    return (uniq % dim).astype(np.int64), (uniq // dim).astype(np.int64), merged


class SparsePrecision:
    """Symmetric matrix, upper triangle stored in (col, row)-sorted order."""

    __slots__ = ("dim", "rows", "cols", "vals")

    def __init__(self, dim, rows, cols, vals, _canonical=False):
        self.dim = int(dim)
        if _canonical:
            self.rows, self.cols, self.vals = rows, cols, vals
        else:
            self.rows, self.cols, self.vals = _canonicalize(self.dim, rows, cols, vals)

    @property
    def nnz(self):
        """Stored entries (upper triangle including diagonal)."""
        return int(self.vals.size)

    @property
    def nnz_full(self):
        """Entry count of the full symmetric matrix."""
        off = int(np.count_nonzero(self.rows != self.cols))
        return self.nnz + off

    def pattern(self):
        """Hashable fingerprint of the sparsity pattern."""
        return (self.dim, self.rows.tobytes(), self.cols.tobytes())

    def with_values(self, vals):
        """Same pattern, new values (no copy of the index arrays)."""
        vals = np.asarray(vals, dtype=np.float64)
        if vals.shape != self.vals.shape:
            raise ValueError("value array does not match pattern size")
        return SparsePrecision(self.dim, self.rows, self.cols, vals, _canonical=True)

    def diagonal(self):
        d = np.zeros(self.dim)
        mask = self.rows == self.cols
        d[self.rows[mask]] = self.vals[mask]
        return d

    def add_diag(self, c):
        """Return self + diag(c) for scalar or length-dim vector c."""
        c = np.broadcast_to(np.asarray(c, dtype=np.float64), (self.dim,))
        mask = self.rows == self.cols
        if int(mask.sum()) == self.dim:
            # full diagonal already stored: value update only, pattern shared
            vals = self.vals.copy()
            vals[mask] += c[self.rows[mask]]
            return self.with_values(vals)
        idx = np.arange(self.dim, dtype=np.int64)
        return SparsePrecision(
            self.dim,
            np.concatenate([self.rows, idx]),
            np.concatenate([self.cols, idx]),
            np.concatenate([self.vals, c]),
        )

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = np.bincount(self.rows, weights=self.vals * x[self.cols], minlength=self.dim)
        off = self.rows != self.cols
        y += np.bincount(self.cols[off], weights=self.vals[off] * x[self.rows[off]], minlength=self.dim)
        return y

    def to_dense(self):
        m = np.zeros((self.dim, self.dim))
        m[self.rows, self.cols] = self.vals
        m[self.cols, self.rows] = self.vals
        return m

    def _csc_upper(self):
        counts = np.bincount(self.cols, minlength=self.dim)
        ap = np.zeros(self.dim + 1, dtype=np.int64)
        np.cumsum(counts, out=ap[1:])
        return ap, self.rows

    def __repr__(self):
        return f"SparsePrecision(dim={self.dim}, nnz={self.nnz})"


def build_sparse(triplets, dim):
    """Assemble from an iterable of (row, col, value) contributions."""
    if dim <= 0:
        raise ValueError("dim must be positive")
    trip = list(triplets)
    if trip:
        rows, cols, vals = (np.asarray(seq) for seq in zip(*trip))
    else:
        rows = cols = vals = np.zeros(0)
    return SparsePrecision(dim, rows, cols, vals)


def add_diag(Q, c):
    """Q + diag(c); see :meth:`SparsePrecision.add_diag`."""
    return Q.add_diag(c)


def load_triplets(path):
    """Read the plain-text triplet format used by test fixtures: a header
    line ``dim nnz`` followed by ``row col value`` lines, 0-based."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("expected header 'dim nnz'")
        dim, nnz = int(header[0]), int(header[1])
        trip = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r, c, v = line.split()
            trip.append((int(r), int(c), float(v)))
    if len(trip) != nnz:
        raise ValueError(f"header promised {nnz} entries, found {len(trip)}")
    return build_sparse(trip, dim)


class CholeskyContext:
    """Ordering plus symbolic factorization, reusable across same-pattern matrices."""

    def __init__(self, Q, ordering="mindeg"):
        self.dim = Q.dim
        self.pattern = Q.pattern()
        if ordering == "mindeg":
            self.perm = minimum_degree(Q.dim, Q.rows, Q.cols)
        elif ordering == "natural":
            self.perm = natural_order(Q.dim)
        else:
            raise ValueError(f"unknown ordering {ordering!r} (expected 'mindeg' or 'natural')")
        self.iperm = np.empty_like(self.perm)
        self.iperm[self.perm] = np.arange(Q.dim, dtype=np.int64)

        self._rows_ref = Q.rows
        self._cols_ref = Q.cols
        pr = self.iperm[Q.rows]
        pc = self.iperm[Q.cols]
        r = np.minimum(pr, pc)
        c = np.maximum(pr, pc)
        order = np.lexsort((r, c))
        self._scatter = order  # permuted-value gather: Ax = vals[order]
        counts = np.bincount(c, minlength=Q.dim)
        self.Ap = np.zeros(Q.dim + 1, dtype=np.int64)
        np.cumsum(counts, out=self.Ap[1:])
        self.Ai = r[order]

        (self.parent, self.Lp, self.Li, self.rowptr, self.rowidx) = _kernels.symbolic(
            self.dim, self.Ap, self.Ai
        )

    @property
    def nnz_L(self):
        return int(self.Lp[-1])

    def factor(self, Q):
        """Numeric factorization of a matrix sharing this context's pattern."""
        shared = Q.rows is self._rows_ref and Q.cols is self._cols_ref
        if not shared and Q.pattern() != self.pattern:
            raise ValueError("matrix pattern does not match the analyzed pattern")
        Ax = Q.vals[self._scatter]
        Lx = np.zeros(self.nnz_L)
        bad = _kernels.numeric(self.Ap, self.Ai, Ax, self.Lp, self.Li, self.rowptr, self.rowidx, Lx)
        if bad >= 0:
            raise NotPositiveDefiniteError(self.perm[bad])
        return CholeskyFactor(self, Lx)


class CholeskyFactor:
    """Lower-triangular factor of a permuted symmetric positive definite matrix."""

    def __init__(self, ctx, Lx):
        self.ctx = ctx
        self.Lx = Lx
        self.dim = ctx.dim

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.dim,):
            raise ValueError(f"right-hand side has length {b.shape}, expected ({self.dim},)")
        y = b[self.ctx.perm].copy()
        _kernels.lsolve(self.ctx.Lp, self.ctx.Li, self.Lx, y)
        _kernels.ltsolve(self.ctx.Lp, self.ctx.Li, self.Lx, y)
        out = np.empty(self.dim)
        out[self.ctx.perm] = y
        return out

    def log_det(self):
        """log determinant of the factored matrix."""
        diag = self.Lx[self.ctx.Lp[:-1]]
        return 2.0 * float(np.sum(np.log(diag)))

    def marginal_variances(self):
        """Diagonal of the inverse of the factored matrix."""
        out = np.zeros(self.dim)
        _kernels.inv_diag(self.ctx.parent, self.ctx.Lp, self.ctx.Li, self.Lx, out)
        res = np.empty(self.dim)
        res[self.ctx.perm] = out
        return res

    def dense_L(self):
        """Dense (permuted) factor, for diagnostics and tests."""
        ctx = self.ctx
        L = np.zeros((self.dim, self.dim))
        for j in range(self.dim):
            sl = slice(ctx.Lp[j], ctx.Lp[j + 1])
            L[ctx.Li[sl], j] = self.Lx[sl]
        return L


def analyze(Q, ordering="mindeg"):
    return CholeskyContext(Q, ordering=ordering)


def cholesky(Q, ordering="mindeg"):
    """Factor a SparsePrecision; raises NotPositiveDefiniteError with the
    failing pivot (original index) when the matrix is not positive definite."""
    return CholeskyContext(Q, ordering=ordering).factor(Q)


def solve(factor, b):
    return factor.solve(b)


def log_det(factor):
    return factor.log_det()


def marginal_variances(factor):
    return factor.marginal_variances()
