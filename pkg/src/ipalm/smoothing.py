"""Moreau smoothing of ``h(u) = h1(u1) + indicator_K(u2)``.

For a multiplier ``lam`` and a smoothing parameter ``beta > 0``::

    h(u; lam, beta) = max_v <u, v> - h*(v) - (beta/2) ||v - lam||^2

The maximizer is the multiplier map ``Lambda(u; lam, beta)``, which is also the
gradient of ``h(.; lam, beta)``. Both are evaluated through the prox of
``beta * h`` (Moreau decomposition), so only catalog proxes are needed.
"""

from dataclasses import dataclass

import numpy as np

from .prox import Point, SimpleFunction, SimpleSet, StackedFunction, StackedSet, Zero

__all__ = ["HSpec", "DualPoint", "lambda_map", "smoothed_value", "recovered_point", "stack_pieces"]


@dataclass(frozen=True)
class HSpec:
    """The nonsmooth map ``h = h1 + indicator_K`` on ``R^(d1 + d2)``.

    Parameters
    ----------
    h1 : SimpleFunction
        Lipschitz part acting on the first `d1` coordinates.
    K : SimpleSet or None
        Constraint set for the last `d2` coordinates.
    d1, d2 : int
    L_h1 : float, optional
        Lipschitz constant of `h1`; computed from the catalog when omitted.
    """

    h1: SimpleFunction
    K: SimpleSet | None
    d1: int
    d2: int
    L_h1: float = None

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0 or self.d1 + self.d2 < 1:
            raise ValueError("HSpec needs d1 >= 0, d2 >= 0 and d1 + d2 >= 1")
        if self.d2 > 0 and self.K is None:
            raise ValueError("a constraint set K is required when d2 > 0")
        if self.L_h1 is None:
            L = 0.0 if self.d1 == 0 else float(self.h1.lipschitz_constant(self.d1))
            object.__setattr__(self, "L_h1", L)
        elif self.L_h1 < 0:
            raise ValueError("L_h1 must be nonnegative")

    @property
    def d(self):
        return self.d1 + self.d2

    @property
    def is_equality(self):
        """True when ``h`` is the indicator of a single point."""
        if self.d1 != 0 or self.K is None:
            return False
        if isinstance(self.K, Point):
            return True
        return isinstance(self.K, StackedSet) and all(isinstance(s, Point) for s, _ in self.K.pieces)

    def split(self, u):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {u.shape}")
        return u[: self.d1], u[self.d1 :]

    @classmethod
    def empty(cls):
        """Placeholder for problems without nonsmooth or constraint rows."""
        obj = object.__new__(cls)
        for k, v in dict(h1=Zero(), K=None, d1=0, d2=0, L_h1=0.0).items():
            object.__setattr__(obj, k, v)
        return obj


@dataclass(frozen=True)
class DualPoint:
    """Multiplier ``(lambda1; lambda2)``."""

    lambda1: np.ndarray
    lambda2: np.ndarray

    @classmethod
    def zeros(cls, h):
        return cls(np.zeros(h.d1), np.zeros(h.d2))

    @classmethod
    def from_vector(cls, h, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (h.d,):
            raise ValueError(f"multiplier must have length {h.d}, got shape {v.shape}")
        return cls(v[: h.d1].copy(), v[h.d1 :].copy())

    def vector(self):
        return np.concatenate([self.lambda1, self.lambda2])

    def __sub__(self, other):
        return DualPoint(self.lambda1 - other.lambda1, self.lambda2 - other.lambda2)

    def norm(self):
        return float(np.sqrt(self.lambda1 @ self.lambda1 + self.lambda2 @ self.lambda2))


def _as_dual(h, lam):
    if isinstance(lam, DualPoint):
        if lam.lambda1.shape != (h.d1,) or lam.lambda2.shape != (h.d2,):
            raise ValueError("multiplier blocks do not match (d1, d2)")
        return lam
    return DualPoint.from_vector(h, lam)


def _check_beta(beta):
    if not beta > 0:
        raise ValueError("beta must be positive")


def recovered_point(h, u, lam, beta):
    """``w = prox_{beta h}(u + beta lam)``, i.e. ``u - beta (Lambda - lam)``."""
    _check_beta(beta)
    lam = _as_dual(h, lam)
    u1, u2 = h.split(u)
    w1 = h.h1.prox(u1 + beta * lam.lambda1, beta) if h.d1 else np.zeros(0)
    w2 = h.K.project(u2 + beta * lam.lambda2) if h.d2 else np.zeros(0)
    return w1, w2


def lambda_map(h, u, lam, beta):
    """Multiplier map ``Lambda(u; lam, beta)`` returned as a :class:`DualPoint`."""
    lam = _as_dual(h, lam)
    u1, u2 = h.split(u)
    w1, w2 = recovered_point(h, u, lam, beta)
    return DualPoint(lam.lambda1 + (u1 - w1) / beta, lam.lambda2 + (u2 - w2) / beta)


def smoothed_value(h, u, lam, beta):
    """``h(u; lam, beta)``.

    Evaluated at the recovered point ``w`` as
    ``h1(w1) + <lam, u - w> + ||u - w||^2 / (2 beta)``, which equals
    ``h(w) + (beta/2)(||Lambda||^2 - ||lam||^2)``. ``w2`` is a projection output,
    so the indicator is never evaluated.
    """
    lam = _as_dual(h, lam)
    u1, u2 = h.split(u)
    w1, w2 = recovered_point(h, u, lam, beta)
    r = np.concatenate([u1 - w1, u2 - w2])
    val = h.h1.value(w1) if h.d1 else 0.0
    return float(val + lam.vector() @ r + (r @ r) / (2.0 * beta))


def stack_pieces(functions, sets):
    """Combine per-block pieces into one ``HSpec``.

    `functions` and `sets` are lists of ``(catalog entry, dim)``.
    """
    d1 = sum(d for _, d in functions)
    d2 = sum(d for _, d in sets)
    if len(functions) == 1:
        h1 = functions[0][0]
    elif functions:
        h1 = StackedFunction(functions)
    else:
        h1 = Zero()
    if len(sets) == 1:
        K = sets[0][0]
    elif sets:
        K = StackedSet(sets)
    else:
        K = None
    if d1 + d2 == 0:
        return HSpec.empty()
    if isinstance(h1, StackedFunction):
        L = h1.lipschitz_constant()
    else:
        L = None
    return HSpec(h1, K, d1, d2, L)
