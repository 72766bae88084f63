"""Affine-composition problems and the per-outer-iteration subproblem oracle.

A :class:`CompositeProblem` is::

    F(x) = sum_j 1/2 ||B_j x - c_j||^2 + g(x) + h1(A1 x)    s.t.  A2 x in K

where the smooth blocks, the nonsmooth pieces (stacked into ``h1``) and the
constraint blocks (stacked into ``K``) are given as :class:`RowBlock` objects.

A :class:`SubproblemOracle` fixes a multiplier, a smoothing parameter ``beta``
and an anchor point and exposes::

    H(x) = phi(x) + P(x),   phi = f + h(A x; lam, beta),   P = g + beta/2 ||x - anchor||^2

through full-gradient, coordinate, finite-sum component and prox access.
Each row of the stacked matrix ``[B; A1; A2]`` is one finite-sum component.
"""

from dataclasses import dataclass

import numpy as np

from .prox import (
    SCALAR_ABS,
    SimpleFunction,
    SimpleSet,
    Zero,
    prox_shifted_quadratic,
)
from .smoothing import DualPoint, lambda_map, smoothed_value, stack_pieces
from .sparse import SparseMatrix, as_vector, column_squared_norms, estimate_spectral_norm

__all__ = [
    "SmoothHalfSquared",
    "NonsmoothPiece",
    "Constraint",
    "RowBlock",
    "CompositeProblem",
    "SubproblemOracle",
    "ResidualIterate",
    "eval_H",
    "grad_phi",
    "prox_P",
    "coordinate_grad_phi",
    "component_grad_phi",
    "ROW_SMOOTH",
    "ROW_ABS",
    "ROW_HINGE",
    "ROW_BOX",
]

# row kinds of the stacked operator, shared with the compiled kernels
ROW_SMOOTH = 0  # 1/2 (u - p1)^2
ROW_ABS = 1  # smoothed p1 * |u - p2|
ROW_HINGE = 2  # smoothed p1 * max(0, p2 - u)
ROW_BOX = 3  # smoothed indicator of [p1, p2]

SPECTRAL_REL_TOL = 1e-6


@dataclass(frozen=True)
class SmoothHalfSquared:
    """Loss ``1/2 ||u - c||^2``."""

    c: np.ndarray


@dataclass(frozen=True)
class NonsmoothPiece:
    """Lipschitz catalog function ``psi`` applied to the block."""

    psi: SimpleFunction


@dataclass(frozen=True)
class Constraint:
    """Requires the block output to lie in ``set``."""

    set: SimpleSet


@dataclass(frozen=True)
class RowBlock:
    B: SparseMatrix
    role: object

    def __post_init__(self):
        if not isinstance(self.B, SparseMatrix):
            object.__setattr__(self, "B", SparseMatrix.from_dense(self.B)
                               if isinstance(self.B, np.ndarray) else SparseMatrix.from_scipy(self.B))
        if not isinstance(self.role, (SmoothHalfSquared, NonsmoothPiece, Constraint)):
            raise TypeError(f"unknown block role {self.role!r}")
        if isinstance(self.role, SmoothHalfSquared):
            c = np.broadcast_to(np.asarray(self.role.c, dtype=np.float64), (self.B.n_rows,))
            object.__setattr__(self, "role", SmoothHalfSquared(as_vector(c, name="c")))


def _inflated_norm(M):
    return estimate_spectral_norm(M, rel_tol=SPECTRAL_REL_TOL) * (1 + 10 * SPECTRAL_REL_TOL)


class CompositeProblem:
    """Container for the affine-composition model.

    Parameters
    ----------
    n : int
        Number of variables.
    blocks : list of RowBlock
    g : SimpleFunction, default Zero()
        Separable simple regularizer.
    mu_g : float, optional
        Strong-convexity modulus of `g`. Defaults to the value declared by the
        catalog entry (``g.mu``) and may not exceed it.
    """

    def __init__(self, n, blocks, g=None, mu_g=None):
        self.n = int(n)
        if self.n < 1:
            raise ValueError("n must be positive")
        self.blocks = list(blocks)
        self.g = Zero() if g is None else g
        if not self.g.separable:
            raise ValueError("g must be separable across coordinates")
        declared = float(self.g.mu)
        if mu_g is None:
            mu_g = declared
        if mu_g < 0 or mu_g > declared + 1e-15:
            raise ValueError(f"mu_g={mu_g} is not a valid modulus for {self.g!r} (declared {declared})")
        self.mu_g = float(mu_g)

        smooth, pieces, cons = [], [], []
        for blk in self.blocks:
            if blk.B.n_cols != self.n:
                raise ValueError(f"block has {blk.B.n_cols} columns, expected {self.n}")
            if isinstance(blk.role, SmoothHalfSquared):
                smooth.append(blk)
            elif isinstance(blk.role, NonsmoothPiece):
                pieces.append(blk)
            else:
                cons.append(blk)

        self.B_smooth = SparseMatrix.vstack([b.B for b in smooth], self.n)
        self.c_smooth = (np.concatenate([b.role.c for b in smooth]) if smooth else np.zeros(0))
        self.A1 = SparseMatrix.vstack([b.B for b in pieces], self.n)
        self.A2 = SparseMatrix.vstack([b.B for b in cons], self.n)
        self.A = SparseMatrix.vstack([self.A1, self.A2], self.n)
        self.A_all = SparseMatrix.vstack([self.B_smooth, self.A], self.n)
        self.h = stack_pieces([(b.role.psi, b.B.n_rows) for b in pieces],
                              [(b.role.set, b.B.n_rows) for b in cons])
        self.d0 = self.B_smooth.n_rows
        self.d1 = self.A1.n_rows
        self.d2 = self.A2.n_rows

        self.L_f = _inflated_norm(self.B_smooth) ** 2
        self.norm_A = _inflated_norm(self.A)
        self.col_sq_smooth = column_squared_norms(self.B_smooth)
        self.col_sq_A = column_squared_norms(self.A)
        self.row_sq = np.asarray(self.A_all.csr.multiply(self.A_all.csr).sum(axis=1)).ravel()
        self.row_encoding = self._encode_rows()
        self.g_encoding = self.g.scalar_encoding(self.n)

    # ----------------------------------------------------------- encoding
    def _encode_rows(self):
        """Per-row ``(kind, p1, p2)`` or ``None`` if some row is not scalar."""
        h = self.h
        kinds = [np.full(self.d0, ROW_SMOOTH, dtype=np.int64)]
        p1 = [self.c_smooth.copy()]
        p2 = [np.zeros(self.d0)]
        try:
            if h.d1:
                k, w, s, r, _ = h.h1.scalar_encoding(h.d1)
                if np.any(r != 0):
                    return None
                kinds.append(np.where(k == SCALAR_ABS, ROW_ABS, ROW_HINGE).astype(np.int64))
                p1.append(w)
                p2.append(s)
            if h.d2:
                lo, hi = h.K.box_encoding(h.d2)
                kinds.append(np.full(h.d2, ROW_BOX, dtype=np.int64))
                p1.append(lo)
                p2.append(hi)
        except (ValueError, NotImplementedError):
            return None
        return np.concatenate(kinds), np.concatenate(p1), np.concatenate(p2)

    @property
    def rows_separable(self):
        return self.row_encoding is not None

    @property
    def n_components(self):
        return self.A_all.n_rows

    # ---------------------------------------------------------- objective
    def f(self, x):
        r = self.B_smooth.csr @ x - self.c_smooth
        return 0.5 * float(r @ r)

    def grad_f(self, x):
        return np.asarray(self.B_smooth.csr.T @ (self.B_smooth.csr @ x - self.c_smooth))

    def h1_value(self, x):
        if not self.d1:
            return 0.0
        return float(self.h.h1.value(self.A1.csr @ x))

    def objective(self, x):
        """``F(x) = f(x) + g(x) + h1(A1 x)``; constraints are reported separately."""
        x = as_vector(x, self.n)
        return self.f(x) + self.g.value(x) + self.h1_value(x)

    def infeasibility(self, x):
        """``dist(A2 x, K)``."""
        if not self.d2:
            return 0.0
        x = as_vector(x, self.n)
        return self.h.K.distance(self.A2.csr @ x)

    def oracle(self, lam, beta, anchor):
        return SubproblemOracle(self, lam, beta, anchor)

    def project_multiplier(self, lam):
        """Nearest multiplier in ``dom(h*)``."""
        lam = lam if isinstance(lam, DualPoint) else DualPoint.from_vector(self.h, lam)
        l1 = self.h.h1.project_conjugate_domain(lam.lambda1) if self.d1 else np.zeros(0)
        l2 = self.h.K.project_support_domain(lam.lambda2) if self.d2 else np.zeros(0)
        return DualPoint(l1, l2)

    def __repr__(self):
        return (f"CompositeProblem(n={self.n}, smooth_rows={self.d0}, "
                f"nonsmooth_rows={self.d1}, constraint_rows={self.d2}, g={self.g!r})")


def row_derivatives(kind, p1, p2, lam, beta, u):
    """Vectorized derivative of each scalar row loss at ``u``."""
    out = np.empty_like(u)
    m = kind == ROW_SMOOTH
    out[m] = u[m] - p1[m]
    for k in (ROW_ABS, ROW_HINGE):
        m = kind == k
        lo = -p1[m]
        hi = p1[m] if k == ROW_ABS else np.zeros(np.count_nonzero(m))
        out[m] = np.clip(lam[m] + (u[m] - p2[m]) / beta, lo, hi)
    m = kind == ROW_BOX
    z = u[m] + beta * lam[m]
    out[m] = lam[m] + (u[m] - np.clip(z, p1[m], p2[m])) / beta
    return out


class SubproblemOracle:
    """Oracle for ``H(x) = f + g + h(Ax; lam, beta) + beta/2 ||x - anchor||^2``."""

    def __init__(self, problem, lam, beta, anchor):
        if not beta > 0:
            raise ValueError("beta must be positive")
        self.problem = problem
        self.beta = float(beta)
        lam = lam if isinstance(lam, DualPoint) else DualPoint.from_vector(problem.h, lam)
        if lam.lambda1.shape != (problem.d1,) or lam.lambda2.shape != (problem.d2,):
            raise ValueError("multiplier does not match the problem's (d1, d2)")
        self.lam = lam
        self.anchor = as_vector(anchor, problem.n, "anchor").copy()
        self.lam_rows = np.concatenate([np.zeros(problem.d0), lam.vector()])

    # -------------------------------------------------------- constants
    @property
    def n(self):
        return self.problem.n

    @property
    def L_s(self):
        """Smoothness constant of ``phi``."""
        return self.problem.L_f + self.problem.norm_A ** 2 / self.beta

    @property
    def mu_s(self):
        """Strong-convexity modulus of ``H``."""
        return self.problem.mu_g + self.beta

    def coordinate_lipschitz(self):
        p = self.problem
        return p.col_sq_smooth + p.col_sq_A / self.beta

    def component_lipschitz(self):
        p = self.problem
        m = p.n_components
        scale = np.concatenate([np.ones(p.d0), np.full(p.d1 + p.d2, 1.0 / self.beta)])
        return m * p.row_sq * scale

    # ------------------------------------------------------- evaluation
    def _split_h(self, u_all):
        return u_all[self.problem.d0:]

    def row_derivatives(self, u_all):
        p = self.problem
        out = np.empty_like(u_all)
        out[: p.d0] = u_all[: p.d0] - p.c_smooth
        if p.d1 + p.d2:
            out[p.d0:] = lambda_map(p.h, u_all[p.d0:], self.lam, self.beta).vector()
        return out

    def phi(self, x):
        p = self.problem
        u = p.A_all.csr @ x
        r = u[: p.d0] - p.c_smooth
        val = 0.5 * float(r @ r)
        if p.d1 + p.d2:
            val += smoothed_value(p.h, u[p.d0:], self.lam, self.beta)
        return val

    def P(self, x):
        d = x - self.anchor
        return self.problem.g.value(x) + 0.5 * self.beta * float(d @ d)

    def eval_H(self, x):
        x = as_vector(x, self.n)
        return self.phi(x) + self.P(x)

    def grad_phi(self, x):
        x = as_vector(x, self.n)
        A = self.problem.A_all.csr
        return np.asarray(A.T @ self.row_derivatives(A @ x))

    def value_and_grad_phi(self, x):
        p = self.problem
        A = p.A_all.csr
        u = A @ x
        r = u[: p.d0] - p.c_smooth
        val = 0.5 * float(r @ r)
        der = np.empty_like(u)
        der[: p.d0] = r
        if p.d1 + p.d2:
            uh = u[p.d0:]
            val += smoothed_value(p.h, uh, self.lam, self.beta)
            der[p.d0:] = lambda_map(p.h, uh, self.lam, self.beta).vector()
        return val, np.asarray(A.T @ der)

    def prox_P(self, v, t):
        return prox_shifted_quadratic(self.problem.g, v, t, self.anchor, self.beta)

    def prox_grad_step(self, x, L=None):
        """One proximal-gradient step with step size ``1 / L`` (default ``L_s``)."""
        L = self.L_s if L is None else L
        if L <= 0:
            return self.prox_P(x, 1.0 / self.mu_s)
        return self.prox_P(x - self.grad_phi(x) / L, 1.0 / L)

    # ------------------------------------------------- finite-sum access
    def component_grad_phi(self, x, j):
        """Gradient of ``m * ell_j(a_j^T x)``; averaging over ``j`` gives ``grad_phi``."""
        p = self.problem
        m = p.n_components
        if not 0 <= j < m:
            raise IndexError(f"component {j} out of range [0, {m})")
        x = as_vector(x, self.n)
        A = p.A_all.csr
        lo, hi = A.indptr[j], A.indptr[j + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        uj = float(vals @ x[cols])
        dj = self._row_derivative(j, uj)
        out = np.zeros(self.n)
        out[cols] = m * dj * vals
        return out

    def _row_derivative(self, j, uj):
        p = self.problem
        if p.rows_separable:
            kind, p1, p2 = p.row_encoding
            return float(row_derivatives(kind[j:j + 1], p1[j:j + 1], p2[j:j + 1],
                                         self.lam_rows[j:j + 1], self.beta, np.array([uj]))[0])
        raise ValueError("component access needs row-separable nonsmooth pieces and sets")

    # ----------------------------------------------------- coordinate access
    def residual_iterate(self, x):
        return ResidualIterate(self, x)

    def coordinate_grad_phi(self, state, i):
        """``[grad_phi(state.x)]_i`` from the cached residual in O(nnz(column i))."""
        if state.oracle is not self:
            raise ValueError("residual iterate belongs to another oracle")
        state.check()
        C = self.problem.A_all.csc
        lo, hi = C.indptr[i], C.indptr[i + 1]
        rows, vals = C.indices[lo:hi], C.data[lo:hi]
        if rows.size == 0:
            return 0.0
        p = self.problem
        if p.rows_separable:
            kind, p1, p2 = p.row_encoding
            der = row_derivatives(kind[rows], p1[rows], p2[rows], self.lam_rows[rows],
                                  self.beta, state.u[rows])
        else:
            der = self.row_derivatives(state.u)[rows]
        return float(vals @ der)


class ResidualIterate:
    """Iterate ``x`` with a cached residual ``u = A_all x``.

    The cache is updated incrementally and recomputed from scratch every
    ``10 n`` coordinate updates.
    """

    def __init__(self, oracle, x):
        self.oracle = oracle
        self.x = as_vector(x, oracle.n).copy()
        self.refresh()

    def refresh(self):
        self.u = np.asarray(self.oracle.problem.A_all.csr @ self.x)
        self.updates_since_refresh = 0

    def check(self):
        if self.u.shape != (self.oracle.problem.A_all.n_rows,):
            raise AssertionError("stale residual cache")

    def update(self, i, delta):
        """``x[i] += delta`` with an O(nnz(column i)) residual update."""
        if delta == 0.0:
            return
        C = self.oracle.problem.A_all.csc
        lo, hi = C.indptr[i], C.indptr[i + 1]
        self.x[i] += delta
        self.u[C.indices[lo:hi]] += delta * C.data[lo:hi]
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= 10 * self.oracle.n:
            self.refresh()


# module-level spellings of the oracle operations


def eval_H(o, x):
    return o.eval_H(x)


def grad_phi(o, x):
    return o.grad_phi(x)


def prox_P(o, v, t):
    return o.prox_P(v, t)


def coordinate_grad_phi(o, state, i):
    return o.coordinate_grad_phi(state, i)


def component_grad_phi(o, x, j):
    return o.component_grad_phi(x, j)
