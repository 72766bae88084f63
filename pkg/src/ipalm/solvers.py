"""Linearly convergent inner solvers for the subproblem ``min_x H(x)``.

Four methods are available:

``apg``
    FISTA with a monotone (function-value) safeguard, restarted every
    ``ceil(2 sqrt(2 L / mu))`` iterations.
``approx``
    Serial accelerated proximal coordinate descent with uniform sampling,
    restarted every ``ceil(2 n sqrt(2 max_i v_i / mu + 2))`` iterations.
``lkatyusha``
    Loopless Katyusha with minibatches of rows drawn with replacement,
    probabilities proportional to the row smoothness constants.
``bregman``
    Bregman proximal gradient with reference ``1/2 ||x||^2 + xi`` where
    ``xi(x) = 1/2 sum_i d_i x_i^2``.

Each solver's rate constant ``K`` is the number of iterations after which the
(expected) optimality gap is guaranteed to halve.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .sparse import SparseMatrix, as_vector, estimate_spectral_norm

logger = logging.getLogger(__name__)

__all__ = ["InnerSolverConfig", "estimate_K", "run", "SOLVER_KINDS"]

SOLVER_KINDS = ("apg", "approx", "lkatyusha", "bregman")
_ALIASES = {
    "apg": "apg",
    "fista": "apg",
    "approx": "approx",
    "lkatyusha": "lkatyusha",
    "l-katyusha": "lkatyusha",
    "katyusha": "lkatyusha",
    "bregman": "bregman",
    "bregmanpg": "bregman",
    "bpg": "bregman",
}


@dataclass
class InnerSolverConfig:
    """Inner-solver settings.

    Parameters
    ----------
    kind : {'apg', 'approx', 'lkatyusha', 'bregman'}
    tau : int
        Minibatch size of L-Katyusha; at most ``floor(sqrt(m))`` for ``m`` rows.
    seed : int
        Seed of the random generator used by the randomized solvers.
    safety_cap : int
        Hard maximum of iterations per call.
    check_every : int, optional
        Iterations between early-stopping checks. Defaults depend on the solver:
        5 for the deterministic ones, ``n`` for APPROX, ``ceil(m / tau)`` for
        L-Katyusha.
    bregman_diag : float or array
        Diagonal ``d`` of the Bregman reference ``xi``; must be positive.
    """

    kind: str = "apg"
    tau: int = 1
    seed: int = 0
    safety_cap: int = 10_000_000
    check_every: int = None
    bregman_diag: object = 1.0
    _bpg_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        key = str(self.kind).lower()
        if key not in _ALIASES:
            raise ValueError(f"unknown solver kind {self.kind!r}; choose from {SOLVER_KINDS}")
        self.kind = _ALIASES[key]
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError("tau must be an integer >= 1")
        self.tau = int(self.tau)
        if int(self.safety_cap) != self.safety_cap or self.safety_cap < 1:
            raise ValueError("safety_cap must be an integer >= 1")
        self.safety_cap = int(self.safety_cap)
        if self.check_every is not None and self.check_every < 1:
            raise ValueError("check_every must be >= 1")
        d = np.asarray(self.bregman_diag, dtype=np.float64)
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("bregman_diag must be positive and finite")

    @property
    def randomized(self):
        return self.kind in ("approx", "lkatyusha")

    def validate_for(self, problem):
        """Check settings that depend on the problem dimensions."""
        if self.randomized and not problem.rows_separable:
            raise ValueError(f"{self.kind} needs row-separable nonsmooth pieces and sets "
                             "(Ball constraints are not supported)")
        if self.kind == "lkatyusha":
            m = problem.n_components
            if self.tau > math.isqrt(m):
                raise ValueError(f"tau={self.tau} exceeds floor(sqrt(m))={math.isqrt(m)} for m={m} rows")


# ------------------------------------------------------------------ K_s


def _bregman_constants(cfg, problem):
    """``(L, mu, A_rel_sq, d_max)`` for the diagonal reference ``xi``.

    ``L`` and ``mu`` are the relative smoothness and strong-convexity constants
    of ``f`` with respect to ``xi``; ``A_rel_sq`` bounds ``||A D^{-1/2}||^2``.
    """
    d = np.broadcast_to(np.asarray(cfg.bregman_diag, dtype=np.float64), (problem.n,))
    key = (id(problem), d.tobytes())
    if key in cfg._bpg_cache:
        return cfg._bpg_cache[key]
    scale = 1.0 / np.sqrt(d)
    Bs = problem.B_smooth.csr @ _diag(scale)
    As = problem.A.csr @ _diag(scale)
    if problem.n <= 1000:
        if Bs.shape[0]:
            ev = np.linalg.eigvalsh((Bs.T @ Bs).toarray())
            L = float(ev[-1]) * (1 + 1e-9)
            mu = max(float(ev[0]), 0.0) * (1 - 1e-9)
        else:
            L, mu = 0.0, 0.0
    else:
        L = (estimate_spectral_norm(SparseMatrix.from_scipy(Bs)) * (1 + 1e-5)) ** 2
        mu = 0.0
    a_sq = (estimate_spectral_norm(SparseMatrix.from_scipy(As)) * (1 + 1e-5)) ** 2
    out = (L, mu, a_sq, float(d.max()))
    cfg._bpg_cache[key] = out
    return out


def _diag(v):
    return sp.diags(v, format="csr")


def _bregman_rel(cfg, o):
    L, mu, a_sq, d_max = _bregman_constants(cfg, o.problem)
    L_rel = max(a_sq / o.beta, L)
    mu_s = o.mu_s
    mu_rel = max(min(mu_s, mu), mu_s / (1.0 + d_max))
    return L_rel, mu_rel


def estimate_K(cfg, o):
    """Rate constant ``K_s >= 1`` of the configured solver on oracle `o`."""
    p = o.problem
    mu_s = o.mu_s
    if cfg.kind == "apg":
        K = 2.0 * math.sqrt(2.0 * (p.L_f + p.norm_A ** 2 / o.beta) / mu_s) + 1.0
    elif cfg.kind == "approx":
        vmax = float(np.max(o.coordinate_lipschitz()))
        K = 2.0 * p.n * math.sqrt(2.0 * vmax / mu_s + 2.0) + 1.0
    elif cfg.kind == "lkatyusha":
        m = p.n_components
        total = float(np.sum(o.component_lipschitz()))
        K = 10.0 * max(m, math.sqrt(total / mu_s)) / cfg.tau + 1.0
    else:
        L_rel, mu_rel = _bregman_rel(cfg, o)
        K = 2.0 * L_rel / mu_rel + 1.0
    return max(1.0, K)


# ------------------------------------------------------------------ run


def run(cfg, o, x0, budget, early_stop=None, rng=None, return_info=False):
    """Run the configured solver for at most ``min(budget, safety_cap)`` iterations.

    Parameters
    ----------
    cfg : InnerSolverConfig
    o : SubproblemOracle
    x0 : array
        Starting point in ``dom(g)``.
    budget : int
    early_stop : (callable, float), optional
        ``(bound, threshold)``: stop as soon as ``bound(x) <= threshold``. The
        bound must dominate ``H(x) - min H``.
    rng : numpy.random.Generator, optional
        Source of randomness; defaults to ``default_rng(cfg.seed)``.
    return_info : bool
        Also return a dict with ``iterations``, ``grad_evals`` (full-gradient
        equivalents: one per APG or Bregman step, ``n`` APPROX steps or
        ``m / tau`` L-Katyusha steps each count as one, and every snapshot
        refresh adds one), ``early_stopped`` and ``last_bound``.
    """
    budget = int(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if budget > cfg.safety_cap:
        logger.warning("inner budget %d exceeds safety cap %d; truncating", budget, cfg.safety_cap)
        budget = cfg.safety_cap
    x0 = as_vector(x0, o.n, "x0").copy()
    info = {"iterations": 0, "grad_evals": 0.0, "early_stopped": False, "last_bound": None}
    if budget == 0:
        return (x0, info) if return_info else x0
    stopper = _Stopper(early_stop, info)
    if stopper(x0):
        return (x0, info) if return_info else x0
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    solver = {"apg": _run_apg, "approx": _run_approx,
              "lkatyusha": _run_lkatyusha, "bregman": _run_bregman}[cfg.kind]
    x = solver(cfg, o, x0, budget, stopper, rng, info)
    return (x, info) if return_info else x


class _Stopper:
    def __init__(self, early_stop, info):
        self.fn, self.threshold = early_stop if early_stop is not None else (None, None)
        self.info = info

    def __call__(self, x):
        if self.fn is None:
            return False
        b = float(self.fn(x))
        self.info["last_bound"] = b
        if b <= self.threshold:
            self.info["early_stopped"] = True
            return True
        return False


def _run_apg(cfg, o, x, budget, stopper, rng, info):
    # phi vanishes when there are no rows; any positive L is then valid
    L = o.L_s or o.mu_s
    restart = max(1, math.ceil(2.0 * math.sqrt(2.0 * L / o.mu_s)))
    every = cfg.check_every or 5
    Hx = o.eval_H(x)
    y = x.copy()
    t = 1.0
    since_restart = 0
    for k in range(1, budget + 1):
        z = o.prox_P(y - o.grad_phi(y) / L, 1.0 / L)
        Hz = o.eval_H(z)
        if Hz <= Hx:
            x_new, H_new = z, Hz
        else:
            x_new, H_new = x, Hx
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        x, Hx, t = x_new, H_new, t_new
        since_restart += 1
        if since_restart == restart:
            y = x.copy()
            t = 1.0
            since_restart = 0
        info["iterations"] = k
        info["grad_evals"] += 1.0
        if k % every == 0 and k < budget and stopper(x):
            break
    return x


def _run_bregman(cfg, o, x, budget, stopper, rng, info):
    L_rel, mu_rel = _bregman_rel(cfg, o)
    L_rel = L_rel or mu_rel
    d = np.broadcast_to(np.asarray(cfg.bregman_diag, dtype=np.float64), (o.n,))
    step = 1.0 / (L_rel * (1.0 + d))
    every = cfg.check_every or 5
    for k in range(1, budget + 1):
        x = o.prox_P(x - step * o.grad_phi(x), step)
        info["iterations"] = k
        info["grad_evals"] += 1.0
        if k % every == 0 and k < budget and stopper(x):
            break
    return x


def _kernel_problem_arrays(o):
    p = o.problem
    kind, p1, p2 = p.row_encoding
    gk, gw, gs, gr, gc = p.g_encoding
    return kind, p1, p2, gk, gw, gs, gr, gc


def _run_approx(cfg, o, x, budget, stopper, rng, info):
    p = o.problem
    n = p.n
    C = p.A_all.csc
    c_ptr = C.indptr.astype(np.int64)
    c_idx = C.indices.astype(np.int64)
    c_val = C.data
    kind, p1, p2, gk, gw, gs, gr, gc = _kernel_problem_arrays(o)
    v = o.coordinate_lipschitz()
    vmax = float(v.max()) if v.size else 0.0
    epoch = max(1, math.ceil(2.0 * n * math.sqrt(2.0 * vmax / o.mu_s + 2.0)))
    every = cfg.check_every or n

    u = np.zeros(n)
    z = x.copy()
    ru = np.zeros(p.A_all.n_rows)
    rz = np.asarray(p.A_all.csr @ z, dtype=np.float64)
    fstate = np.array([1.0 / n, 1.0 / n])
    istate = np.zeros(2, dtype=np.int64)
    done = 0
    while done < budget:
        chunk = min(every, budget - done)
        idx = rng.integers(0, n, size=chunk)
        _kernels.approx_chunk(idx, epoch, p.A_all.n_rows, c_ptr, c_idx, c_val,
                              kind, p1, p2, o.lam_rows, o.beta,
                              gk, gw, gs, gr, gc, o.anchor, v,
                              u, z, ru, rz, fstate, istate)
        done += chunk
        info["iterations"] = done
        info["grad_evals"] += chunk / n
        if done < budget and stopper(fstate[1] ** 2 * u + z):
            break
    return fstate[1] ** 2 * u + z


def _run_lkatyusha(cfg, o, x, budget, stopper, rng, info):
    p = o.problem
    m = p.n_components
    tau = cfg.tau
    R = p.A_all.csr
    r_ptr = R.indptr.astype(np.int64)
    r_idx = R.indices.astype(np.int64)
    r_val = R.data
    kind, p1, p2, gk, gw, gs, gr, gc = _kernel_problem_arrays(o)
    Lj = o.component_lipschitz()
    total = float(Lj.sum())
    if total <= 0:
        # phi is constant: the prox of P alone is the minimizer
        info["iterations"] = 1
        return o.prox_P(x, 1e300)
    probs = Lj / total
    L_bar = total / m
    theta2 = 1.0 / (2.0 * tau)
    theta1 = min(1.0, math.sqrt(o.mu_s * m / L_bar)) * theta2
    alpha = 1.0 / (3.0 * theta1 * L_bar)
    p_snap = tau / m
    every = cfg.check_every or max(1, math.ceil(m / tau))

    y = x.copy()
    z = x.copy()
    w = x.copy()
    rw = np.zeros(m)
    gwt = np.zeros(p.n)
    _kernels._refresh_snapshot(w, rw, gwt, r_ptr, r_idx, r_val, kind, p1, p2,
                               o.lam_rows, o.beta)
    xbuf = np.empty(p.n)
    gbuf = np.empty(p.n)
    stats = np.zeros(1, dtype=np.int64)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    done = 0
    info["grad_evals"] += 1.0
    while done < budget:
        chunk = min(every, budget - done)
        samples = np.searchsorted(cdf, rng.random((chunk, tau)), side="right")
        samples = np.minimum(samples, m - 1).astype(np.int64)
        coins = rng.random(chunk)
        before = int(stats[0])
        _kernels.katyusha_chunk(samples, coins, r_ptr, r_idx, r_val,
                                kind, p1, p2, o.lam_rows, o.beta, probs,
                                gk, gw, gs, gr, gc, o.anchor,
                                theta1, theta2, alpha, p_snap,
                                y, z, w, rw, gwt, xbuf, gbuf, stats)
        done += chunk
        info["iterations"] = done
        # snapshot derivatives come from the cached row values, so each
        # iteration costs tau fresh component gradients
        info["grad_evals"] += chunk * tau / m + (int(stats[0]) - before)
        if done < budget and stopper(y):
            break
    return y.copy()
