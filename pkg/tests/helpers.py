"""Independent oracles and instance generators shared by the test modules."""

import functools

import numpy as np

from ipalm.problem import CompositeProblem, Constraint, NonsmoothPiece, RowBlock, SmoothHalfSquared
from ipalm.prox import AbsSum, Ball, Box, HalfSquaredL2, HingeSum, NonNegativeOrthant, Point, WeightedL1, Zero
from ipalm.smoothing import HSpec, stack_pieces

# ---------------------------------------------------------------- h variants

H1_MAKERS = {
    "abs": lambda rng, d: AbsSum(rng.uniform(0.1, 2.0), center=rng.standard_normal(d)),
    "hinge": lambda rng, d: HingeSum(rng.uniform(0.1, 2.0), margins=rng.standard_normal(d)),
    "wl1": lambda rng, d: WeightedL1(rng.uniform(0.1, 2.0, d)),
}


def _random_box(rng, d):
    lo = rng.standard_normal(d) - rng.uniform(0, 1, d)
    return Box(lo, lo + rng.uniform(0, 2, d))


K_MAKERS = {
    "point": lambda rng, d: Point(rng.standard_normal(d)),
    "box": _random_box,
    "orthant": lambda rng, d: NonNegativeOrthant(),
    "ball": lambda rng, d: Ball(rng.standard_normal(d), rng.uniform(0.1, 2.0)),
}

H_VARIANTS = (
    [(f, None) for f in H1_MAKERS]
    + [(None, k) for k in K_MAKERS]
    + [(f, k) for f in H1_MAKERS for k in ("point", "box", "orthant")]
)


def make_h(rng, variant, d1=1, d2=1):
    """Build an ``HSpec`` for a ``(h1 name, K name)`` variant."""
    f, k = variant
    functions = [(H1_MAKERS[f](rng, d1), d1)] if f else []
    sets = [(K_MAKERS[k](rng, d2), d2)] if k else []
    return stack_pieces(functions, sets)


def conjugate_h(h, v):
    """``h*(v) = h1*(v1) + sigma_K(v2)``.

    `v` is first moved onto ``dom(h*)`` so that points off the domain by
    rounding error do not evaluate to ``inf``.
    """
    v1, v2 = v[: h.d1], v[h.d1:]
    if h.d1:
        assert np.linalg.norm(h.h1.project_conjugate_domain(v1) - v1) <= 1e-9 * (1 + np.abs(v1).max())
        v1 = h.h1.project_conjugate_domain(v1)
    if h.d2:
        assert np.linalg.norm(h.K.project_support_domain(v2) - v2) <= 1e-9 * (1 + np.abs(v2).max())
        v2 = h.K.project_support_domain(v2)
    val = h.h1.conjugate(v1) if h.d1 else 0.0
    if h.d2:
        val += h.K.support(v2)
    return val


def _piece_values(fn, Z):
    """Row-wise value of a catalog function at the points ``Z`` (one per row)."""
    if isinstance(fn, AbsSum):
        return fn.scale * np.abs(Z - fn.center).sum(axis=1)
    if isinstance(fn, HingeSum):
        return fn.scale * np.maximum(0.0, fn.margins - Z).sum(axis=1)
    if isinstance(fn, WeightedL1):
        return (fn.weights * np.abs(Z)).sum(axis=1) + 0.5 * fn.ridge * (Z * Z).sum(axis=1)
    raise TypeError(fn)


def _set_distances(K, Z):
    if isinstance(K, Point):
        return np.linalg.norm(Z - K.b, axis=1)
    if isinstance(K, Box):
        return np.linalg.norm(Z - np.clip(Z, K.lower, K.upper), axis=1)
    if isinstance(K, NonNegativeOrthant):
        return np.linalg.norm(np.minimum(Z, 0.0), axis=1)
    if isinstance(K, Ball):
        return np.maximum(np.linalg.norm(Z - K.center, axis=1) - K.radius, 0.0)
    raise TypeError(K)


def _project_rows(K, Z):
    if isinstance(K, Point):
        return np.broadcast_to(K.b, Z.shape).copy()
    if isinstance(K, Box):
        return np.clip(Z, K.lower, K.upper)
    if isinstance(K, NonNegativeOrthant):
        return np.maximum(Z, 0.0)
    if isinstance(K, Ball):
        D = Z - K.center
        r = np.linalg.norm(D, axis=1, keepdims=True)
        return K.center + D * np.minimum(1.0, K.radius / np.maximum(r, 1e-300))
    raise TypeError(K)


def h_values(h, Z):
    """``h`` at every row of ``Z``; the indicator is a distance test."""
    vals = _piece_values(h.h1, Z[:, : h.d1]) if h.d1 else np.zeros(len(Z))
    if h.d2:
        vals = np.where(_set_distances(h.K, Z[:, h.d1:]) > 1e-12, np.inf, vals)
    return vals


@functools.lru_cache(maxsize=None)
def _unit_grid(points, k):
    """Cartesian grid of ``points**k`` offsets in ``[-1, 1]^k``."""
    if k == 0:
        return np.zeros((1, 0))
    axis = np.linspace(-1.0, 1.0, points)
    return np.stack([a.ravel() for a in np.meshgrid(*([axis] * k), indexing="ij")], axis=1)


def grid_smoothed_value(h, u, lam, beta, points=101, rounds=16):
    """``min_z h(z) + ||u - z||^2 / (2 beta) + <u - z, lam>`` by zooming grids.

    Brute force for ``d <= 2`` on a single catalog piece per block. A
    single-point ``K`` pins its coordinates; other grid points are mapped onto
    ``K`` so every sample is feasible. Each round shrinks the search box to
    five grid spacings around the incumbent.
    """
    fixed = np.full(h.d, np.nan)
    if h.d2 and isinstance(h.K, Point):
        fixed[h.d1:] = np.broadcast_to(h.K.b, (h.d2,))
    free = np.isnan(fixed)
    # the quadratic part is minimized at u + beta lam; h1 moves the minimizer
    # by at most beta L_h1 and K by at most the distance to K
    center = np.where(free, u + beta * lam, fixed)
    radius = 2.0 + 2 * beta * h.L_h1
    if h.d2:
        c2 = center[h.d1:]
        radius += 2 * float(np.linalg.norm(h.K.project(c2) - c2))
    unit = _unit_grid(points, int(free.sum()))
    best = np.inf
    for _ in range(rounds):
        Z = np.repeat(center[None, :], len(unit), axis=0)
        Z[:, free] += radius * unit
        if h.d2:
            Z[:, h.d1:] = _project_rows(h.K, Z[:, h.d1:])
        R = u - Z
        vals = h_values(h, Z) + (R * R).sum(axis=1) / (2 * beta) + R @ lam
        i = int(np.argmin(vals))
        best, center = float(vals[i]), Z[i]
        radius *= 10.0 / (points - 1)
    return best


# ---------------------------------------------------------------- problems

def random_problem(rng, n=None, with_smooth=True, with_pieces=True, with_constraints=True,
                   ridge=0.0, sparse_density=None):
    """Random composite problem mixing every row role.

    Nonsmooth and constraint pieces are drawn from the scalar-encodable catalog
    so that every solver, including the randomized ones, applies.
    """
    n = n or int(rng.integers(2, 8))
    blocks = []

    def mat(k):
        A = rng.standard_normal((k, n))
        if sparse_density is not None:
            A *= rng.random((k, n)) < sparse_density
        return A

    if with_smooth:
        k = int(rng.integers(1, 6))
        blocks.append(RowBlock(mat(k), SmoothHalfSquared(rng.standard_normal(k))))
    if with_pieces:
        k = int(rng.integers(1, 4))
        blocks.append(RowBlock(mat(k), NonsmoothPiece(AbsSum(rng.uniform(0.2, 1.0), rng.standard_normal(k)))))
        k = int(rng.integers(1, 4))
        blocks.append(RowBlock(mat(k), NonsmoothPiece(HingeSum(rng.uniform(0.2, 1.0), rng.standard_normal(k)))))
    if with_constraints:
        k = int(rng.integers(1, 3))
        A = mat(k)
        x_feas = rng.standard_normal(n)
        blocks.append(RowBlock(A, Constraint(Point(A @ x_feas))))
        k = int(rng.integers(1, 3))
        A = mat(k)
        u = A @ x_feas
        blocks.append(RowBlock(A, Constraint(Box(u - rng.uniform(0, 1, k), u + rng.uniform(0, 1, k)))))
    g = WeightedL1(rng.uniform(0.0, 0.5, n), ridge=ridge)
    return CompositeProblem(n, blocks, g=g)


def strongly_convex_problem(rng, n=None, m=None):
    """Random problem whose subproblems suit every solver (scalar rows, ``mu_g > 0``)."""
    n = n or int(rng.integers(3, 20))
    m = m or int(rng.integers(n, 5 * n))
    A = rng.standard_normal((m, n)) / np.sqrt(n)
    b = rng.standard_normal(m)
    k = m // 2
    blocks = [RowBlock(A[:k], SmoothHalfSquared(b[:k])),
              RowBlock(A[k:], NonsmoothPiece(AbsSum(1.0, b[k:])))]
    return CompositeProblem(n, blocks, g=WeightedL1(rng.uniform(0, 0.3, n), ridge=rng.uniform(0.05, 0.5)))


def reference_minimum(oracle, x0, tol=1e-13, max_iter=1_000_000):
    """Minimize ``H`` by plain proximal gradient until the duality gap is below `tol`.

    Returns ``(x, H(x), gap)``. Proximal gradient uses none of the accelerated
    or randomized machinery under test; the certificate is computed from the
    dual side, so the value is a two-sided bracket.
    """
    from ipalm.diagnostics import duality_gap_bound

    L = oracle.L_s
    x = np.array(x0, dtype=np.float64)
    gap = np.inf
    for k in range(max_iter):
        x = oracle.prox_P(x - oracle.grad_phi(x) / L, 1.0 / L)
        if k % 50 == 0:
            gap = duality_gap_bound(oracle, x).gap
            if gap <= tol:
                break
    return x, oracle.eval_H(x), gap


__all__ = [
    "H_VARIANTS", "make_h", "conjugate_h", "h_values", "grid_smoothed_value",
    "random_problem", "strongly_convex_problem", "reference_minimum",
    "HSpec", "HalfSquaredL2", "Zero",
]


# ---------------------------------------------------------------- prox catalog

def catalog_functions(rng, n):
    """One random instance of every function in the catalog, keyed by name."""
    from ipalm.prox import StackedFunction

    k = max(1, n // 2)
    return {
        "zero": Zero(),
        "weighted_l1": WeightedL1(rng.uniform(0, 2, n)),
        "elastic_net": WeightedL1(rng.uniform(0, 2, n), ridge=rng.uniform(0.1, 2)),
        "abs_sum": AbsSum(rng.uniform(0.1, 2), rng.standard_normal(n)),
        "half_squared": HalfSquaredL2(rng.uniform(0.1, 2), rng.standard_normal(n)),
        "hinge": HingeSum(rng.uniform(0.1, 2), rng.standard_normal(n)),
        "stacked": StackedFunction([(AbsSum(rng.uniform(0.1, 2), rng.standard_normal(k)), k),
                                    (HingeSum(rng.uniform(0.1, 2), rng.standard_normal(n - k)), n - k)]),
    }


def catalog_sets(rng, n):
    """One random instance of every set in the catalog, keyed by name."""
    from ipalm.prox import StackedSet

    k = max(1, n // 2)
    return {
        "point": Point(rng.standard_normal(n)),
        "box": _random_box(rng, n),
        "half_infinite_box": Box(np.where(rng.random(n) < 0.5, -np.inf, -1.0), rng.uniform(0, 1, n)),
        "orthant": NonNegativeOrthant(),
        "ball": Ball(rng.standard_normal(n), rng.uniform(0.1, 2)),
        "stacked": StackedSet([(Ball(rng.standard_normal(k), 1.0), k), (_random_box(rng, n - k), n - k)]),
    }


def prox_violations(fn, v, w, t, rng, trials=20):
    """Worst violation of the prox optimality conditions at ``p = prox_{t fn}(v)``.

    Returns ``(inclusion, variational, firm)``: distance of ``(v - p) / t``
    from the reported subdifferential box, the worst failure of the
    strong-convexity inequality of the prox objective over random ``z``, and
    the failure of firm nonexpansiveness against ``q = prox(w)``.
    """
    p, q = fn.prox(v, t), fn.prox(w, t)
    lo, hi = fn.subdifferential_bounds(p)
    gsub = (v - p) / t
    inclusion = float(np.max(np.maximum(lo - gsub, 0) + np.maximum(gsub - hi, 0), initial=0.0))
    # (v - p) / t carries rounding of order eps * |v| / t
    inclusion /= max(1.0, float(np.abs(gsub).max(initial=0.0)),
                     1e-8 * float(np.abs(v).max(initial=0.0)) / float(np.min(t)))

    def obj(z):
        return t * fn.value(z) + 0.5 * float((z - v) @ (z - v))

    base = obj(p)
    variational = 0.0
    for _ in range(trials):
        z = p + rng.standard_normal(p.size) * 10.0 ** rng.uniform(-6, 1)
        gap = obj(z) - base - 0.5 * float((z - p) @ (z - p))
        variational = max(variational, -gap / max(1.0, abs(base)))
    firm = float((p - q) @ (p - q) - (p - q) @ (v - w))
    return inclusion, variational, max(firm, 0.0)


def projection_violations(K, v, w, rng, trials=20):
    """Worst violation of the projection conditions at ``p = P_K(v)``.

    Returns ``(inclusion, variational, firm)``: infeasibility of ``p`` plus the
    normal-cone test ``sigma_K(v - p) = <v - p, p>``, the worst
    ``<v - p, z - p>`` over random feasible ``z``, and the failure of firm
    nonexpansiveness.
    """
    p, q = K.project(v), K.project(w)
    r = v - p
    inclusion = float(np.linalg.norm(_project_rows(K, p[None, :])[0] - p)) if not hasattr(K, "pieces") \
        else float(K.distance(p))
    inclusion += max(K.support(r) - r @ p, 0.0) / max(1.0, float(np.abs(r).max() * np.abs(p).max()))
    variational = 0.0
    for _ in range(trials):
        z = K.project(p + rng.standard_normal(p.size) * 10.0 ** rng.uniform(-3, 1))
        variational = max(variational, float(r @ (z - p)) / max(1.0, float(np.linalg.norm(r))))
    firm = float((p - q) @ (p - q) - (p - q) @ (v - w))
    return inclusion, variational, max(firm, 0.0)
