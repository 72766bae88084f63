"""Simple functions and simple sets with closed-form proximal maps.

Every catalog entry is separable across coordinates except :class:`Ball`. Each
function knows its value, prox, convex conjugate and (when it has one) a
Euclidean Lipschitz constant; each set knows its projection, distance and
support function. Those four pieces are what the smoothing, duality-gap and
inner-budget code need.

Scalar parameters broadcast, so ``WeightedL1(1.0)`` works in any dimension.
"""

import numpy as np

__all__ = [
    "SimpleFunction",
    "Zero",
    "WeightedL1",
    "HalfSquaredL2",
    "HingeSum",
    "AbsSum",
    "StackedFunction",
    "SimpleSet",
    "Point",
    "Box",
    "NonNegativeOrthant",
    "Ball",
    "StackedSet",
    "prox",
    "project",
    "prox_shifted_quadratic",
    "lipschitz_constant",
    "soft_threshold",
    "SCALAR_ABS",
    "SCALAR_HINGE",
]

# scalar encodings consumed by the compiled coordinate kernels
SCALAR_ABS = 0  # w * |x - s| + (r / 2) * (x - c) ** 2
SCALAR_HINGE = 1  # w * max(0, s - x)


def soft_threshold(v, thresh):
    """Componentwise ``sign(v) * max(|v| - thresh, 0)``; ties go to zero."""
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _check_t(t):
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("prox step t must be positive and finite")
    return t_arr if t_arr.ndim else float(t_arr)


def _nonneg(value, name):
    arr = np.asarray(value, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be nonnegative and finite")
    return arr if arr.ndim else float(arr)


def _bcast(p, n):
    return np.broadcast_to(np.asarray(p, dtype=np.float64), (n,)).copy()


class SimpleFunction:
    """Base class of the closed catalog. Subclasses are immutable."""

    mu = 0.0
    separable = True

    def value(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def prox(self, v, t):
        raise NotImplementedError

    def conjugate(self, y):
        """Convex conjugate; ``inf`` outside its domain."""
        raise NotImplementedError

    def project_conjugate_domain(self, y):
        """Nearest point of ``dom(f*)``."""
        return np.array(y, dtype=np.float64)

    def lipschitz_constant(self, dim):
        raise ValueError(f"{type(self).__name__} is not Lipschitz continuous")

    def subdifferential_bounds(self, x):
        """Per-coordinate interval ``[lo, hi]`` with ``df(x) = prod [lo_i, hi_i]``."""
        raise NotImplementedError

    def scalar_encoding(self, dim):
        """Arrays ``(kind, w, s, r, c)`` describing each coordinate as a scalar
        function for the compiled kernels."""
        raise NotImplementedError


class Zero(SimpleFunction):
    def value(self, x):
        return 0.0

    def prox(self, v, t):
        _check_t(t)
        return np.array(v, dtype=np.float64)

    def conjugate(self, y):
        return 0.0 if not np.any(y) else np.inf

    def project_conjugate_domain(self, y):
        return np.zeros_like(np.asarray(y, dtype=np.float64))

    def lipschitz_constant(self, dim):
        return 0.0

    def subdifferential_bounds(self, x):
        z = np.zeros_like(np.asarray(x, dtype=np.float64))
        return z, z.copy()

    def scalar_encoding(self, dim):
        z = np.zeros(dim)
        return np.full(dim, SCALAR_ABS, dtype=np.int64), z, z.copy(), z.copy(), z.copy()

    def __repr__(self):
        return "Zero()"


class WeightedL1(SimpleFunction):
    """``sum_i w_i |x_i| + (ridge / 2) ||x||^2``.

    ``ridge`` gives an elastic-net style strongly convex variant; its modulus is
    reported as ``mu``.
    """

    def __init__(self, weights=1.0, ridge=0.0):
        self.weights = _nonneg(weights, "weights")
        self.ridge = float(_nonneg(ridge, "ridge"))
        self.mu = self.ridge

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(np.sum(self.weights * np.abs(x)) + 0.5 * self.ridge * (x @ x))

    def prox(self, v, t):
        t = _check_t(t)
        v = np.asarray(v, dtype=np.float64)
        return soft_threshold(v, t * self.weights) / (1.0 + t * self.ridge)

    def conjugate(self, y):
        y = np.asarray(y, dtype=np.float64)
        excess = np.abs(y) - self.weights
        if self.ridge > 0:
            return float(np.sum(np.maximum(excess, 0.0) ** 2) / (2.0 * self.ridge))
        return 0.0 if np.all(excess <= 1e-12 * np.maximum(1.0, self.weights)) else np.inf

    def project_conjugate_domain(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.ridge > 0:
            return y.copy()
        return np.clip(y, -self.weights, self.weights)

    def lipschitz_constant(self, dim):
        if self.ridge > 0:
            raise ValueError("WeightedL1 with a ridge term is not Lipschitz continuous")
        return float(np.linalg.norm(_bcast(self.weights, dim)))

    def subdifferential_bounds(self, x):
        x = np.asarray(x, dtype=np.float64)
        w = np.broadcast_to(self.weights, x.shape)
        base = self.ridge * x
        lo = np.where(x > 0, w, np.where(x < 0, -w, -w)) + base
        hi = np.where(x > 0, w, np.where(x < 0, -w, w)) + base
        return lo, hi

    def scalar_encoding(self, dim):
        z = np.zeros(dim)
        return (np.full(dim, SCALAR_ABS, dtype=np.int64), _bcast(self.weights, dim),
                z, np.full(dim, self.ridge), z.copy())

    def __repr__(self):
        return f"WeightedL1(weights={self.weights!r}, ridge={self.ridge!r})"


class AbsSum(SimpleFunction):
    """``scale * ||x - center||_1``; the center carries affine offsets such as ``Ax - b``."""

    def __init__(self, scale=1.0, center=0.0):
        self.scale = float(_nonneg(scale, "scale"))
        self.center = np.asarray(center, dtype=np.float64)
        if not np.all(np.isfinite(self.center)):
            raise ValueError("center must be finite")

    def value(self, x):
        return float(self.scale * np.sum(np.abs(np.asarray(x, dtype=np.float64) - self.center)))

    def prox(self, v, t):
        t = _check_t(t)
        v = np.asarray(v, dtype=np.float64)
        return self.center + soft_threshold(v - self.center, t * self.scale)

    def conjugate(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any(np.abs(y) > self.scale * (1 + 1e-12) + 1e-300):
            return np.inf
        return float(np.sum(y * self.center))

    def project_conjugate_domain(self, y):
        return np.clip(np.asarray(y, dtype=np.float64), -self.scale, self.scale)

    def lipschitz_constant(self, dim):
        return self.scale * float(np.sqrt(dim))

    def subdifferential_bounds(self, x):
        d = np.asarray(x, dtype=np.float64) - self.center
        c = self.scale
        lo = np.where(d > 0, c, -c)
        hi = np.where(d < 0, -c, c)
        return lo, hi

    def scalar_encoding(self, dim):
        z = np.zeros(dim)
        return (np.full(dim, SCALAR_ABS, dtype=np.int64), np.full(dim, self.scale),
                _bcast(self.center, dim), z, z.copy())

    def __repr__(self):
        return f"AbsSum(scale={self.scale!r}, center={self.center!r})"


class HalfSquaredL2(SimpleFunction):
    """``(weight / 2) * ||x - center||^2``."""

    def __init__(self, weight=1.0, center=0.0):
        self.weight = float(_nonneg(weight, "weight"))
        self.center = np.asarray(center, dtype=np.float64)
        self.mu = self.weight

    def value(self, x):
        d = np.asarray(x, dtype=np.float64) - self.center
        d = np.broadcast_to(d, np.shape(x))
        return 0.5 * self.weight * float(d @ d)

    def prox(self, v, t):
        t = _check_t(t)
        v = np.asarray(v, dtype=np.float64)
        return (v + t * self.weight * self.center) / (1.0 + t * self.weight)

    def conjugate(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.weight == 0:
            return 0.0 if not np.any(y) else np.inf
        c = np.broadcast_to(self.center, y.shape)
        return float(y @ c + (y @ y) / (2.0 * self.weight))

    def project_conjugate_domain(self, y):
        y = np.asarray(y, dtype=np.float64)
        return np.zeros_like(y) if self.weight == 0 else y.copy()

    def lipschitz_constant(self, dim):
        if self.weight == 0:
            return 0.0
        return super().lipschitz_constant(dim)

    def subdifferential_bounds(self, x):
        g = self.weight * (np.asarray(x, dtype=np.float64) - self.center)
        g = np.broadcast_to(g, np.shape(x)).copy()
        return g, g.copy()

    def scalar_encoding(self, dim):
        z = np.zeros(dim)
        return (np.full(dim, SCALAR_ABS, dtype=np.int64), z, z.copy(),
                np.full(dim, self.weight), _bcast(self.center, dim))

    def __repr__(self):
        return f"HalfSquaredL2(weight={self.weight!r}, center={self.center!r})"


class HingeSum(SimpleFunction):
    """``scale * sum_i max(0, margins_i - x_i)``."""

    def __init__(self, scale=1.0, margins=1.0):
        self.scale = float(_nonneg(scale, "scale"))
        self.margins = np.asarray(margins, dtype=np.float64)
        if not np.all(np.isfinite(self.margins)):
            raise ValueError("margins must be finite")

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(self.scale * np.sum(np.maximum(0.0, self.margins - x)))

    def prox(self, v, t):
        t = _check_t(t)
        v = np.asarray(v, dtype=np.float64)
        a = np.broadcast_to(self.margins, v.shape)
        ct = t * self.scale
        return np.where(v >= a, v, np.where(v <= a - ct, v + ct, a))

    def conjugate(self, y):
        y = np.asarray(y, dtype=np.float64)
        tol = 1e-12 * max(1.0, self.scale)
        if np.any(y > tol) or np.any(y < -self.scale - tol):
            return np.inf
        return float(np.sum(y * np.broadcast_to(self.margins, y.shape)))

    def project_conjugate_domain(self, y):
        return np.clip(np.asarray(y, dtype=np.float64), -self.scale, 0.0)

    def lipschitz_constant(self, dim):
        return self.scale * float(np.sqrt(dim))

    def subdifferential_bounds(self, x):
        d = np.asarray(x, dtype=np.float64) - self.margins
        c = self.scale
        lo = np.where(d > 0, 0.0, -c)
        hi = np.where(d < 0, -c, 0.0)
        return lo, hi

    def scalar_encoding(self, dim):
        z = np.zeros(dim)
        return (np.full(dim, SCALAR_HINGE, dtype=np.int64), np.full(dim, self.scale),
                _bcast(self.margins, dim), z, z.copy())

    def __repr__(self):
        return f"HingeSum(scale={self.scale!r}, margins={self.margins!r})"


class StackedFunction(SimpleFunction):
    """Block-separable sum ``sum_k f_k(x[slice_k])`` of catalog functions."""

    def __init__(self, pieces):
        self.pieces = [(fn, int(dim)) for fn, dim in pieces]
        self.offsets = np.concatenate([[0], np.cumsum([d for _, d in self.pieces])]).astype(int)
        self.dim = int(self.offsets[-1])
        self.mu = min((fn.mu for fn, _ in self.pieces), default=0.0)
        self.separable = all(fn.separable for fn, _ in self.pieces)

    def _slices(self):
        for k, (fn, _) in enumerate(self.pieces):
            yield fn, slice(self.offsets[k], self.offsets[k + 1])

    def _t_slice(self, t, sl):
        return t[sl] if np.ndim(t) else t

    def value(self, x):
        return float(sum(fn.value(x[sl]) for fn, sl in self._slices()))

    def prox(self, v, t):
        t = _check_t(t)
        v = np.asarray(v, dtype=np.float64)
        out = np.empty_like(v)
        for fn, sl in self._slices():
            out[sl] = fn.prox(v[sl], self._t_slice(t, sl))
        return out

    def conjugate(self, y):
        return float(sum(fn.conjugate(y[sl]) for fn, sl in self._slices()))

    def project_conjugate_domain(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.empty_like(y)
        for fn, sl in self._slices():
            out[sl] = fn.project_conjugate_domain(y[sl])
        return out

    def lipschitz_constant(self, dim=None):
        return float(np.sqrt(sum(fn.lipschitz_constant(d) ** 2 for fn, d in self.pieces)))

    def subdifferential_bounds(self, x):
        lo = np.empty_like(np.asarray(x, dtype=np.float64))
        hi = np.empty_like(lo)
        for fn, sl in self._slices():
            lo[sl], hi[sl] = fn.subdifferential_bounds(x[sl])
        return lo, hi

    def scalar_encoding(self, dim=None):
        parts = [fn.scalar_encoding(d) for fn, d in self.pieces]
        if not parts:
            return (np.zeros(0, dtype=np.int64),) + tuple(np.zeros(0) for _ in range(4))
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(5))

    def __repr__(self):
        return f"StackedFunction({self.pieces!r})"


# --------------------------------------------------------------------- sets


class SimpleSet:
    """Base class for closed convex sets with cheap projections."""

    separable = True

    def project(self, v):
        raise NotImplementedError

    def distance(self, v):
        v = np.asarray(v, dtype=np.float64)
        return float(np.linalg.norm(v - self.project(v)))

    def contains(self, v, tol=1e-12):
        return self.distance(v) <= tol

    def support(self, y):
        """Support function ``sup_{u in K} <y, u>``, the conjugate of the indicator."""
        raise NotImplementedError

    def project_support_domain(self, y):
        return np.array(y, dtype=np.float64)

    def box_encoding(self, dim):
        """Per-coordinate ``(lower, upper)`` bounds; only for separable sets."""
        raise NotImplementedError


class Point(SimpleSet):
    def __init__(self, b):
        self.b = np.asarray(b, dtype=np.float64)
        if not np.all(np.isfinite(self.b)):
            raise ValueError("Point must be finite")

    def project(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.b.ndim and self.b.shape != v.shape:
            raise ValueError(f"dimension mismatch: point has {self.b.shape}, got {v.shape}")
        return np.broadcast_to(self.b, v.shape).astype(np.float64, copy=True)

    def support(self, y):
        y = np.asarray(y, dtype=np.float64)
        return float(y @ np.broadcast_to(self.b, y.shape))

    def box_encoding(self, dim):
        b = _bcast(self.b, dim)
        return b, b.copy()

    def __repr__(self):
        return f"Point({self.b!r})"


class Box(SimpleSet):
    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        if np.any(self.lower > self.upper):
            raise ValueError("Box requires lower <= upper componentwise")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("Box bounds must not be NaN")

    def project(self, v):
        v = np.asarray(v, dtype=np.float64)
        for bound in (self.lower, self.upper):
            if bound.ndim and bound.shape != v.shape:
                raise ValueError(f"dimension mismatch: box has {bound.shape}, got {v.shape}")
        return np.clip(v, self.lower, self.upper)

    def support(self, y):
        y = np.asarray(y, dtype=np.float64)
        lo = np.broadcast_to(self.lower, y.shape)
        hi = np.broadcast_to(self.upper, y.shape)
        if np.any((y > 0) & np.isinf(hi)) or np.any((y < 0) & np.isinf(lo)):
            return np.inf
        pos = np.where(y > 0, y * np.where(np.isinf(hi), 0.0, hi), 0.0)
        neg = np.where(y < 0, y * np.where(np.isinf(lo), 0.0, lo), 0.0)
        return float(np.sum(pos + neg))

    def project_support_domain(self, y):
        y = np.array(y, dtype=np.float64)
        hi = np.broadcast_to(self.upper, y.shape)
        lo = np.broadcast_to(self.lower, y.shape)
        y = np.where(np.isinf(hi), np.minimum(y, 0.0), y)
        return np.where(np.isinf(lo), np.maximum(y, 0.0), y)

    def box_encoding(self, dim):
        return _bcast(self.lower, dim), _bcast(self.upper, dim)

    def __repr__(self):
        return f"Box({self.lower!r}, {self.upper!r})"


class NonNegativeOrthant(SimpleSet):
    def project(self, v):
        return np.maximum(np.asarray(v, dtype=np.float64), 0.0)

    def support(self, y):
        return 0.0 if np.all(np.asarray(y) <= 0) else np.inf

    def project_support_domain(self, y):
        return np.minimum(np.asarray(y, dtype=np.float64), 0.0)

    def box_encoding(self, dim):
        return np.zeros(dim), np.full(dim, np.inf)

    def __repr__(self):
        return "NonNegativeOrthant()"


class Ball(SimpleSet):
    """Euclidean ball; the one non-separable set in the catalog."""

    separable = False

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        if self.radius < 0 or not np.isfinite(self.radius):
            raise ValueError("Ball radius must be finite and nonnegative")

    def project(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.center.ndim and self.center.shape != v.shape:
            raise ValueError(f"dimension mismatch: center has {self.center.shape}, got {v.shape}")
        d = v - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return v.copy()
        return self.center + d * (self.radius / nd)

    def support(self, y):
        y = np.asarray(y, dtype=np.float64)
        return float(y @ np.broadcast_to(self.center, y.shape) + self.radius * np.linalg.norm(y))

    def box_encoding(self, dim):
        raise ValueError("Ball is not separable")

    def __repr__(self):
        return f"Ball({self.center!r}, {self.radius!r})"


class StackedSet(SimpleSet):
    """Cartesian product of catalog sets."""

    def __init__(self, pieces):
        self.pieces = [(s, int(dim)) for s, dim in pieces]
        self.offsets = np.concatenate([[0], np.cumsum([d for _, d in self.pieces])]).astype(int)
        self.dim = int(self.offsets[-1])
        self.separable = all(s.separable for s, _ in self.pieces)

    def _slices(self):
        for k, (s, _) in enumerate(self.pieces):
            yield s, slice(self.offsets[k], self.offsets[k + 1])

    def project(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {v.shape}")
        out = np.empty_like(v)
        for s, sl in self._slices():
            out[sl] = s.project(v[sl])
        return out

    def support(self, y):
        return float(sum(s.support(y[sl]) for s, sl in self._slices()))

    def project_support_domain(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.empty_like(y)
        for s, sl in self._slices():
            out[sl] = s.project_support_domain(y[sl])
        return out

    def box_encoding(self, dim=None):
        parts = [s.box_encoding(d) for s, d in self.pieces]
        if not parts:
            return np.zeros(0), np.zeros(0)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def __repr__(self):
        return f"StackedSet({self.pieces!r})"


# ------------------------------------------------------------ module API


def prox(fn, v, t):
    """``argmin_x fn(x) + ||x - v||^2 / (2 t)``."""
    return fn.prox(v, t)


def project(set_, v):
    """Euclidean projection of `v` onto `set_`."""
    return set_.project(v)


def prox_shifted_quadratic(fn, v, t, anchor, beta):
    """``argmin_x fn(x) + (beta/2)||x - anchor||^2 + ||x - v||^2 / (2t)``.

    `t` may be an array (diagonal metric).
    """
    t = _check_t(t)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    prec = 1.0 / t + beta
    return fn.prox((v / t + beta * np.asarray(anchor, dtype=np.float64)) / prec, 1.0 / prec)


def lipschitz_constant(fn, dim):
    """Euclidean Lipschitz constant of `fn` on ``R^dim``."""
    return fn.lipschitz_constant(dim)
