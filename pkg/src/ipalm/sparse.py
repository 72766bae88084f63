"""Compressed sparse row matrices and the dense-vector helpers used everywhere.

The matrix type is a thin, validated wrapper around :class:`scipy.sparse.csr_matrix`.
Products go through scipy's CSR kernels, which accumulate each row left to right,
so results are reproducible bit for bit.
"""

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "as_vector",
    "apply",
    "estimate_spectral_norm",
    "column_squared_norms",
]


def as_vector(x, n=None, name="x"):
    """Return `x` as a 1-D float64 array, rejecting NaN/Inf and wrong lengths."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


class SparseMatrix:
    """Immutable CSR matrix.

    Parameters
    ----------
    n_rows, n_cols : int
    row_offsets : array of int, length ``n_rows + 1``
    col_indices : array of int
    values : array of float

    Column indices must be strictly increasing within each row. Use
    :meth:`from_dense` or :meth:`from_scipy` to build one from other formats;
    those canonicalize (sum duplicates, sort indices) first.
    """

    __slots__ = ("_csr", "_csc")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values):
        n_rows = int(n_rows)
        n_cols = int(n_cols)
        if n_rows < 0 or n_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        indptr = np.asarray(row_offsets, dtype=np.int64)
        indices = np.asarray(col_indices, dtype=np.int64)
        data = np.asarray(values, dtype=np.float64)
        if indptr.shape != (n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        if indptr[-1] != data.size or data.size != indices.size:
            raise ValueError("row_offsets[-1], len(values) and len(col_indices) disagree")
        if indices.size and (indices.min() < 0 or indices.max() >= n_cols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix values must be finite")
        for r in range(n_rows):
            seg = indices[indptr[r]:indptr[r + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise ValueError(f"column indices of row {r} are not strictly increasing")
        self._csr = sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols))
        self._csr.has_sorted_indices = True
        self._csc = None

    @classmethod
    def from_scipy(cls, m):
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a, keep_zeros=False):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        if keep_zeros:
            rows, cols = np.nonzero(np.ones_like(a, dtype=bool))
            m = sp.csr_matrix((a[rows, cols], (rows, cols)), shape=a.shape)
            return cls.from_scipy(m)
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(sp.identity(n, format="csr"))

    @classmethod
    def zeros(cls, n_rows, n_cols):
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64), [], [])

    @classmethod
    def vstack(cls, mats, n_cols=None):
        mats = list(mats)
        if not mats:
            if n_cols is None:
                raise ValueError("n_cols is required when stacking nothing")
            return cls.zeros(0, n_cols)
        return cls.from_scipy(sp.vstack([m.csr for m in mats], format="csr"))

    @property
    def n_rows(self):
        return self._csr.shape[0]

    @property
    def n_cols(self):
        return self._csr.shape[1]

    @property
    def shape(self):
        return self._csr.shape

    @property
    def row_offsets(self):
        return self._csr.indptr

    @property
    def col_indices(self):
        return self._csr.indices

    @property
    def values(self):
        return self._csr.data

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self):
        return self._csr

    @property
    def csc(self):
        if self._csc is None:
            c = self._csr.tocsc()
            c.sort_indices()
            self._csc = c
        return self._csc

    def toarray(self):
        return self._csr.toarray()

    def row_slice(self, start, stop):
        return SparseMatrix.from_scipy(self._csr[start:stop])

    def scale_rows(self, factors):
        factors = as_vector(factors, self.n_rows, "factors")
        return SparseMatrix.from_scipy(sp.diags(factors) @ self._csr)

    def apply(self, x, transposed=False):
        return apply(self, x, transposed)

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def apply(A, x, transposed=False):
    """Sparse matrix-vector product ``A @ x`` or ``A.T @ x``."""
    if transposed:
        x = as_vector(x, A.n_rows)
        return np.asarray(A.csr.T @ x, dtype=np.float64)
    x = as_vector(x, A.n_cols)
    return np.asarray(A.csr @ x, dtype=np.float64)


def estimate_spectral_norm(A, rel_tol=1e-6, max_iter=200, seed=0):
    """Power iteration on ``A.T A``; returns an estimate from below of ``||A||_2``.

    Callers that need a safe upper bound should inflate the result by
    ``1 + 10 * rel_tol``.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if A.nnz == 0 or not np.any(A.values):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.n_cols)
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = A.csr.T @ (A.csr @ v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; restart elsewhere
            v = rng.standard_normal(A.n_cols)
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        if sigma2 > 0 and abs(new - sigma2) <= 0.1 * rel_tol * new:
            sigma2 = new
            break
        sigma2 = new
    # one more Rayleigh quotient from the converged direction
    Av = A.csr @ v
    return float(max(np.sqrt(max(sigma2, 0.0)), np.linalg.norm(Av)))


def column_squared_norms(A):
    """Entry ``i`` is the sum over rows of ``A[r, i] ** 2``."""
    out = np.zeros(A.n_cols)
    np.add.at(out, A.col_indices, A.values ** 2)
    return out
