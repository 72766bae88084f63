"""Benchmark problems: libsvm ingestion, row normalization and builders.

Four families are supported:

* least absolute deviation ``||Ax - b||_1 + lam ||x||_1``;
* basis pursuit ``min ||x||_1  s.t.  Ax = b``;
* fused lasso ``1/2 ||Ax - b||^2 + lam_r ||x||_1 + lam_1mr sum_i |x_i - x_{i+1}|``;
* l1 soft-margin SVM ``1/m sum_i max(0, 1 - b_i (a_i^T x - w)) + lam ||x||_1``.

:func:`synthetic_instance` builds small instances with a known optimum.
"""

import gzip
import io
import itertools
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .problem import CompositeProblem, Constraint, NonsmoothPiece, RowBlock, SmoothHalfSquared
from .prox import AbsSum, HalfSquaredL2, HingeSum, Point, WeightedL1
from .sparse import SparseMatrix, as_vector

__all__ = [
    "LabeledDataset",
    "LibsvmParseError",
    "LAD",
    "BasisPursuit",
    "FusedLasso",
    "SoftMarginSVM",
    "EqualityQP",
    "parse_libsvm",
    "load_libsvm",
    "dump_libsvm",
    "normalize_rows",
    "difference_matrix",
    "build_problem",
    "synthetic_instance",
    "SYNTHETIC_FAMILIES",
]


@dataclass(frozen=True)
class LabeledDataset:
    X: SparseMatrix
    labels: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (self.X.n_rows,):
            raise ValueError("labels length must equal the number of samples")

    @property
    def shape(self):
        return self.X.shape


class LibsvmParseError(ValueError):
    def __init__(self, line_no, msg):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


# ------------------------------------------------------------------ libsvm


def parse_libsvm(stream, n_features=None):
    """Parse libsvm text (``label idx:val ...``, 1-based increasing indices).

    Parameters
    ----------
    stream : bytes, str path, or binary file object
        Gzip-compressed input is detected and decompressed transparently.
    n_features : int, optional
        Overrides the feature count (must be at least the largest index seen).
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, "rb") as fh:
            raw = fh.read()
    elif isinstance(stream, (bytes, bytearray)):
        raw = bytes(stream)
    else:
        raw = stream.read()
        if isinstance(raw, str):
            raw = raw.encode()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)

    labels, indptr, indices, data = [], [0], [], []
    max_idx = 0
    for line_no, line in enumerate(io.StringIO(raw.decode("utf-8")), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmParseError(line_no, f"bad label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(line_no, f"expected idx:value, got {tok!r}")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise LibsvmParseError(line_no, f"bad feature {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(line_no, f"feature index {idx} must be >= 1")
            if idx <= prev:
                raise LibsvmParseError(line_no, f"feature indices not strictly increasing at {idx}")
            if not np.isfinite(val):
                raise LibsvmParseError(line_no, f"non-finite value in {tok!r}")
            prev = idx
            indices.append(idx - 1)
            data.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))

    n = max_idx if n_features is None else int(n_features)
    if n < max_idx:
        raise ValueError(f"n_features={n} is smaller than the largest index {max_idx}")
    X = SparseMatrix(len(labels), n, indptr, indices, data)
    return LabeledDataset(X, np.asarray(labels, dtype=np.float64))


def load_libsvm(path, n_features=None):
    return parse_libsvm(path, n_features)


def dump_libsvm(data, fh=None):
    """Serialize to libsvm text; values use ``repr`` so parsing round-trips exactly."""
    out = io.StringIO()
    X = data.X
    for r in range(X.n_rows):
        lo, hi = X.row_offsets[r], X.row_offsets[r + 1]
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(X.col_indices[lo:hi], X.values[lo:hi]))
        out.write(f"{float(data.labels[r])!r} {feats}".rstrip() + "\n")
    text = out.getvalue().encode("utf-8")
    if fh is not None:
        fh.write(text)
    return text


def normalize_rows(X):
    """Scale every nonzero row to unit Euclidean norm."""
    sq = np.asarray(X.csr.multiply(X.csr).sum(axis=1)).ravel()
    norms = np.sqrt(sq)
    factors = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return X.scale_rows(factors)


def difference_matrix(n):
    """``(n-1) x n`` matrix with rows ``e_i - e_{i+1}``."""
    D = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [0, 1], shape=(max(n - 1, 0), n), format="csr")
    return SparseMatrix.from_scipy(D)


# ------------------------------------------------------------------ kinds


@dataclass(frozen=True)
class LAD:
    lam: float = 0.01


@dataclass(frozen=True)
class BasisPursuit:
    pass


@dataclass(frozen=True)
class FusedLasso:
    lambda_r: float = 0.01
    lambda_1mr: float = 0.01
    ridge: float = 0.0


@dataclass(frozen=True)
class SoftMarginSVM:
    lam: float = 0.01


@dataclass(frozen=True)
class EqualityQP:
    """``min 1/2 ||x - c||^2  s.t.  Ax = b`` with ``c`` taken from ``center``."""

    center: np.ndarray = None


def _positive(name, v):
    if not v > 0:
        raise ValueError(f"{name} must be positive (got {v})")


def build_problem(kind, data):
    """Assemble the :class:`CompositeProblem` of a benchmark family.

    `data.labels` plays the role of ``b`` (or of the class labels for the SVM).
    """
    X, b = data.X, data.labels
    m, n = X.shape
    if m < 1 or n < 1:
        raise ValueError("dataset must have at least one sample and one feature")
    if isinstance(kind, LAD):
        _positive("lam", kind.lam)
        return CompositeProblem(n, [RowBlock(X, NonsmoothPiece(AbsSum(1.0, center=b)))],
                                g=WeightedL1(kind.lam))
    if isinstance(kind, BasisPursuit):
        return CompositeProblem(n, [RowBlock(X, Constraint(Point(b)))], g=WeightedL1(1.0))
    if isinstance(kind, FusedLasso):
        _positive("lambda_r", kind.lambda_r)
        _positive("lambda_1mr", kind.lambda_1mr)
        blocks = [RowBlock(X, SmoothHalfSquared(b))]
        if n > 1:
            blocks.append(RowBlock(difference_matrix(n), NonsmoothPiece(AbsSum(kind.lambda_1mr))))
        return CompositeProblem(n, blocks, g=WeightedL1(kind.lambda_r, ridge=kind.ridge))
    if isinstance(kind, SoftMarginSVM):
        _positive("lam", kind.lam)
        if not np.all(np.isin(b, (-1.0, 1.0))):
            raise ValueError("SVM labels must be -1 or +1")
        aug = sp.hstack([X.csr, -np.ones((m, 1))], format="csr")
        rows = SparseMatrix.from_scipy(sp.diags(b) @ aug)
        weights = np.concatenate([np.full(n, kind.lam), [0.0]])
        return CompositeProblem(n + 1, [RowBlock(rows, NonsmoothPiece(HingeSum(1.0 / m, 1.0)))],
                                g=WeightedL1(weights))
    if isinstance(kind, EqualityQP):
        c = np.zeros(n) if kind.center is None else as_vector(kind.center, n, "center")
        return CompositeProblem(n, [RowBlock(X, Constraint(Point(b)))], g=HalfSquaredL2(1.0, c))
    raise TypeError(f"unknown benchmark kind {kind!r}")


def reference_objective(kind, data, x):
    """Objective of a benchmark family evaluated directly from its formula."""
    A = data.X.toarray()
    b = data.labels
    if isinstance(kind, LAD):
        return np.abs(A @ x - b).sum() + kind.lam * np.abs(x).sum()
    if isinstance(kind, BasisPursuit):
        return np.abs(x).sum()
    if isinstance(kind, FusedLasso):
        r = A @ x - b
        return (0.5 * r @ r + kind.lambda_r * np.abs(x).sum()
                + kind.lambda_1mr * np.abs(np.diff(x)).sum() + 0.5 * kind.ridge * x @ x)
    if isinstance(kind, SoftMarginSVM):
        w, omega = x[:-1], x[-1]
        return (np.maximum(0.0, 1.0 - b * (A @ w - omega)).mean() + kind.lam * np.abs(w).sum())
    raise TypeError(f"unknown benchmark kind {kind!r}")


# -------------------------------------------------------------- synthetic

SYNTHETIC_FAMILIES = ("equality_qp", "planted_bp", "lad_small", "lad", "fused_lasso", "svm")


def _gaussian_rows(rng, m, n, normalize=True):
    A = rng.standard_normal((m, n))
    if normalize:
        A /= np.linalg.norm(A, axis=1, keepdims=True)
    return A


def synthetic_instance(family, dims, sparsity=None, seed=0):
    """Small instance of a family, with its optimum when one is known.

    Parameters
    ----------
    family : str
        One of ``SYNTHETIC_FAMILIES``.
    dims : tuple of int
        ``(n,)`` or ``(n, p)`` for ``equality_qp`` (``(n,)`` is the instance
        ``min 1/2 ||x||^2 s.t. sum(x) = n``); ``(m, n)`` otherwise.
    sparsity : int, optional
        Support size of the planted basis-pursuit solution.
    seed : int

    Returns
    -------
    problem : CompositeProblem
    certificate : dict or None
        ``{"x", "lam", "F"}`` for the known optimum (``lam`` is the multiplier
        of the constraint rows, when the family has them), plus ``"data"``
        and ``"kind"`` for the benchmark families.
    """
    rng = np.random.default_rng(seed)
    if family == "equality_qp":
        return _equality_qp(dims, rng)
    if family == "planted_bp":
        return _planted_bp(dims, sparsity if sparsity is not None else 5, rng)
    if family == "lad_small":
        return _lad_small(dims, rng)
    m, n = dims
    if family == "lad":
        A = _gaussian_rows(rng, m, n)
        x = np.where(rng.random(n) < 0.2, rng.standard_normal(n), 0.0)
        b = A @ x + 0.1 * rng.standard_normal(m) * (rng.random(m) < 0.2)
        data, kind = _dataset(A, b), LAD()
    elif family == "fused_lasso":
        A = _gaussian_rows(rng, m, n)
        x = np.repeat(rng.standard_normal(max(1, n // 10)), 10)[:n]
        x = np.pad(x, (0, n - x.size))
        b = A @ x + 0.01 * rng.standard_normal(m)
        data, kind = _dataset(A, b), FusedLasso()
    elif family == "svm":
        A = _gaussian_rows(rng, m, n)
        w = rng.standard_normal(n)
        labels = np.where(A @ w + 0.1 * rng.standard_normal(m) >= 0, 1.0, -1.0)
        data, kind = _dataset(A, labels), SoftMarginSVM()
    else:
        raise ValueError(f"unknown synthetic family {family!r}; choose from {SYNTHETIC_FAMILIES}")
    return build_problem(kind, data), {"data": data, "kind": kind}


def _dataset(A, b):
    return LabeledDataset(SparseMatrix.from_dense(A), np.asarray(b, dtype=np.float64))


def _equality_qp(dims, rng):
    if len(dims) == 1:
        n = dims[0]
        A = np.ones((1, n))
        c = np.zeros(n)
        b = np.array([float(n)])
    else:
        n, p = dims
        if p > n:
            raise ValueError("equality_qp needs p <= n")
        A = rng.standard_normal((p, n))
        c = rng.standard_normal(n)
        b = rng.standard_normal(p)
    data = _dataset(A, b)
    problem = build_problem(EqualityQP(c), data)
    lam = np.linalg.solve(A @ A.T, A @ c - b)
    x = c - A.T @ lam
    return problem, {"x": x, "lam": lam, "F": 0.5 * float((x - c) @ (x - c)),
                     "data": data, "kind": EqualityQP(c)}


def _planted_bp(dims, k, rng):
    m, n = dims
    if not 0 < k <= m <= n:
        raise ValueError("planted_bp needs 0 < sparsity <= m <= n")
    for _ in range(1000):
        A = _gaussian_rows(rng, m, n)
        S = np.sort(rng.choice(n, size=k, replace=False))
        sigma = rng.choice([-1.0, 1.0], size=k)
        AS = A[:, S]
        y = AS @ np.linalg.solve(AS.T @ AS, sigma)
        off = np.delete(A.T @ y, S)
        if np.max(np.abs(off)) < 1 - 1e-3:
            break
    else:
        raise RuntimeError("could not plant a certified basis-pursuit instance")
    x = np.zeros(n)
    x[S] = sigma * (0.5 + rng.random(k))
    b = A @ x
    data = _dataset(A, b)
    cert = {
        "x": x, "lam": -y, "F": float(np.abs(x).sum()), "support": S, "dual": y,
        "off_support_max": float(np.max(np.abs(off))),
        "data": data, "kind": BasisPursuit(),
    }
    return build_problem(BasisPursuit(), data), cert


def lad_vertex_optimum(A, b, lam):
    """Exact LAD optimum by enumerating vertices of the breakpoint arrangement.

    The objective is convex and piecewise linear, its pieces are delimited by
    the hyperplanes ``a_i^T x = b_i`` and ``x_j = 0``, and the coordinate
    hyperplanes alone have full rank, so a minimizer sits at an intersection
    of ``n`` independent hyperplanes.
    """
    m, n = A.shape
    H = np.vstack([A, np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    best, best_x = np.inf, None
    for rows in itertools.combinations(range(m + n), n):
        M = H[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs[list(rows)])
        val = np.abs(A @ x - b).sum() + lam * np.abs(x).sum()
        if val < best:
            best, best_x = val, x
    return best_x, float(best)


def _lad_small(dims, rng):
    m, n = dims
    if n > 6:
        raise ValueError("lad_small enumerates vertices and needs n <= 6")
    A = _gaussian_rows(rng, m, n)
    b = rng.standard_normal(m)
    kind = LAD()
    x, F = lad_vertex_optimum(A, b, kind.lam)
    data = _dataset(A, b)
    return build_problem(kind, data), {"x": x, "lam": None, "F": F, "data": data, "kind": kind}
