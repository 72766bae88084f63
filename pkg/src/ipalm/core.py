"""Outer loops of the inexact proximal augmented Lagrangian method.

Each outer iteration ``s`` updates the multiplier with the multiplier map,
shrinks ``beta`` and the target accuracy ``eps`` geometrically, derives the
number of inner iterations from the computable carry-over term ``M_s`` and the
inner solver's rate constant, and warm-starts the inner solver at the previous
iterate. No optimal value of any subproblem is needed at runtime.

:func:`ipalm_kkt_solve` adds one proximal-gradient step after every inner solve,
which makes the KKT residual bounds in the trace valid.
"""

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import solvers
from .diagnostics import duality_gap_bound, kkt_bounds
from .smoothing import DualPoint, lambda_map
from .sparse import as_vector

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigurationError",
    "OuterParams",
    "OuterState",
    "TraceRecord",
    "ConvergenceTrace",
    "TRACE_COLUMNS",
    "compute_M",
    "inner_budget",
    "multiplier_update",
    "estimate_eps0",
    "ipalm_solve",
    "ipalm_kkt_solve",
]


class ConfigurationError(ValueError):
    """Raised when outer or inner parameters violate their constraints."""


@dataclass
class OuterParams:
    """Outer-loop parameters.

    Parameters
    ----------
    beta0 : float
        Initial smoothing parameter, ``> 0``.
    rho : float
        Decay of ``beta``, in ``(1/2, 1)``.
    eta : float, optional
        Decay of the accuracy target, in ``(0, rho)``. Defaults to 0.8, or 0.7
        in KKT mode. ``eta == rho`` is accepted only with ``bounded_domain``;
        KKT mode requires ``eta <= rho**3``.
    m0 : int, optional
        Iterations of the warm-start inner solve; defaults to ``ceil(K_0)``.
    eps0 : float, optional
        Bound on the initial subproblem gap; estimated when omitted.
    max_outer : int
    target_eps : float
        Tolerance of the runtime stopping test; ``0`` disables the test so
        exactly ``max_outer`` outer iterations run.
    kkt_mode : bool
    bounded_domain : bool
        Declares that ``dom(g)`` is bounded and there are no constraint rows.
    early_stop : bool
        Let inner solvers stop once the duality-gap certificate reaches ``eps``.
    eps_guard : bool
        Double the accuracy schedule whenever a computable lower bound on the
        subproblem gap exceeds the current target.
    """

    beta0: float = 1.0
    rho: float = 0.9
    eta: float = None
    m0: int = None
    eps0: float = None
    max_outer: int = 100
    target_eps: float = 1e-6
    kkt_mode: bool = False
    bounded_domain: bool = False
    early_stop: bool = True
    eps_guard: bool = True

    def __post_init__(self):
        if self.eta is None:
            self.eta = 0.7 if self.kkt_mode else 0.8
        self.validate()

    def validate(self):
        def bad(msg):
            raise ConfigurationError(msg)

        if not (self.beta0 > 0 and math.isfinite(self.beta0)):
            bad(f"beta0 must be positive and finite (got {self.beta0})")
        if not 0.5 < self.rho < 1:
            bad(f"rho must lie in (1/2, 1) (got {self.rho})")
        if not 0 < self.eta < 1:
            bad(f"eta must lie in (0, 1) (got {self.eta})")
        if self.kkt_mode:
            if self.eta > self.rho ** 3:
                bad(f"KKT mode requires eta <= rho^3 = {self.rho ** 3:.6g} (got eta={self.eta})")
        elif self.eta > self.rho or (self.eta == self.rho and not self.bounded_domain):
            bad(f"eta must be < rho (got eta={self.eta}, rho={self.rho}); "
                "eta == rho needs the bounded-domain flag")
        if self.m0 is not None and (int(self.m0) != self.m0 or self.m0 < 1):
            bad(f"m0 must be an integer >= 1 (got {self.m0})")
        if self.eps0 is not None and not (self.eps0 > 0 and math.isfinite(self.eps0)):
            bad(f"eps0 must be positive (got {self.eps0})")
        if int(self.max_outer) != self.max_outer or self.max_outer < 0:
            bad(f"max_outer must be a nonnegative integer (got {self.max_outer})")
        if not self.target_eps >= 0:
            bad(f"target_eps must be nonnegative (got {self.target_eps})")


@dataclass
class OuterState:
    """``(s, x^{s-1}, x^s, lambda^s, beta_s, eps_s)`` plus bookkeeping."""

    s: int
    x_prev: np.ndarray
    x_cur: np.ndarray
    lam: DualPoint
    beta_s: float
    eps_s: float
    last_M: float = 0.0
    cumulative_inner: int = 0


TRACE_COLUMNS = ("s", "beta_s", "eps_s", "K_s", "m_s", "M_s", "F", "infeas",
                 "kkt_x_bound", "kkt_lam_bound", "inner_cum", "wall_ms")


@dataclass
class TraceRecord:
    """One outer iteration.

    ``K_s`` and ``m_s`` are the rate constant and budget of the inner solve
    that produced ``x^s``; ``M_s``, ``kkt_lam_bound`` and ``feas_bound`` use
    ``lambda^{s+1}`` and ``kkt_x_bound`` is ``nan`` outside KKT mode.
    """

    s: int
    beta_s: float
    eps_s: float
    K_s: float
    m_s: int
    M_s: float = float("nan")
    F: float = float("nan")
    infeas: float = float("nan")
    kkt_x_bound: float = float("nan")
    kkt_lam_bound: float = float("nan")
    inner_cum: int = 0
    wall_ms: float = 0.0
    feas_bound: float = float("nan")
    inner_iters: int = 0
    grad_evals_cum: float = 0.0
    early_stopped: bool = False

    def row(self):
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    eps_doublings: int = 0
    surrogate_violations: int = 0
    monotone_violations: int = 0

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def converged(self):
        return self.status == "converged"

    def to_csv(self, path_or_file, timing=True):
        """Write the fixed-column CSV; ``timing=False`` writes zero wall times."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            vals = []
            for c, v in zip(TRACE_COLUMNS, r.row()):
                if c == "wall_ms" and not timing:
                    v = 0.0
                vals.append(v if isinstance(v, (int, np.integer)) else repr(float(v)))
            w.writerow(vals)
        text = buf.getvalue()
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


# ------------------------------------------------------------ pieces


def compute_M(state, lam_next, lam_probe, beta_next, h):
    """Carry-over term ``M_s`` bounding the change between consecutive subproblems.

    Parameters
    ----------
    state : OuterState
        Holds ``x^{s-1}, x^s, lambda^s, beta_s``.
    lam_next : DualPoint
        ``lambda^{s+1}``.
    lam_probe : DualPoint
        ``Lambda(A x^s; lambda^{s+1}, beta_{s+1})``.
    beta_next : float
    h : HSpec
        Supplies ``L_h1`` and whether ``h`` is a single-point indicator, in
        which case the last term vanishes.
    """
    b, bn = state.beta_s, beta_next
    if not (b >= bn > b / 2):
        raise ValueError(f"need beta_s >= beta_next > beta_s / 2 (got {b}, {bn})")
    dlam = (lam_next - state.lam).norm()
    probe = (lam_probe - lam_next).norm()
    dx = state.x_prev - state.x_cur
    M = (b * dlam ** 2 + 0.5 * (b - bn) * probe ** 2
         + b * b / (2 * bn - b) * float(dx @ dx))
    if not h.is_equality and dlam > 0:
        s1 = np.linalg.norm(b * state.lam.lambda1 - bn * lam_next.lambda1)
        s2 = np.linalg.norm(b * state.lam.lambda2 - bn * lam_next.lambda2)
        M += dlam * math.sqrt(((b + bn) * h.L_h1 + s1) ** 2 + s2 ** 2)
    return float(M)


def inner_budget(eps_s, eps_next, M_s, K_next, safety_cap=10_000_000):
    """Smallest ``m`` with ``2**floor(m / K) * eps_next / 2 >= 2 eps_s + M_s``, clamped to ``[1, safety_cap]``."""
    if not (eps_s > 0 and eps_next > 0 and M_s >= 0 and K_next >= 1):
        raise ValueError("inner_budget needs eps_s, eps_next > 0, M_s >= 0, K_next >= 1")
    need = 2.0 * eps_s + M_s
    t = max(0, math.ceil(math.log2((4.0 * eps_s + 2.0 * M_s) / eps_next)))
    # guard the logarithm against rounding in either direction
    while t > 0 and 2.0 ** (t - 1) * eps_next / 2.0 >= need:
        t -= 1
    while 2.0 ** t * eps_next / 2.0 < need:
        t += 1
    m = max(1, math.ceil(K_next * t))
    while m > 1 and math.floor((m - 1) / K_next) >= t:
        m -= 1
    while math.floor(m / K_next) < t:
        m += 1
    return int(min(max(m, 1), safety_cap))


def multiplier_update(state, u, h):
    """``lambda^{s+1} = Lambda(u; lambda^s, beta_s)`` with ``u = A x^s``."""
    return lambda_map(h, u, state.lam, state.beta_s)


def _descent_gap_bound(o, x):
    """``H(x) - H(x+) + ||xi||^2 / (2 mu)``, with ``x+`` a prox-gradient step and ``xi`` in dH(x+)."""
    L = o.L_s
    if L <= 0:
        # phi is constant, so the minimizer of H is the minimizer of P
        return max(o.eval_H(x) - o.eval_H(o.prox_P(o.anchor, 1e300)), 0.0)
    gx = o.grad_phi(x)
    xp = o.prox_P(x - gx / L, 1.0 / L)
    xi = o.grad_phi(xp) - gx + L * (x - xp)
    return o.eval_H(x) - o.eval_H(xp) + float(xi @ xi) / (2.0 * o.mu_s)


def estimate_eps0(o, x0):
    """Certified upper bound on ``H_0(x0) - min H_0``.

    The smaller of the duality-gap certificate and a descent-lemma bound; never
    below ``1e-12 * max(1, |H_0(x0)|)`` so that the schedule stays positive.
    """
    x0 = as_vector(x0, o.n)
    bounds = [_descent_gap_bound(o, x0)]
    gap = duality_gap_bound(o, x0).gap
    if math.isfinite(gap):
        bounds.append(gap)
    floor = 1e-12 * max(1.0, abs(o.eval_H(x0)))
    return max(min(bounds), floor)


def _gap_lower_bound(o, x):
    """``H(x) - H(x+) <= H(x) - min H`` for a prox-gradient step ``x+``."""
    L = o.L_s
    if L <= 0:
        return 0.0
    xp = o.prox_grad_step(x, L)
    return o.eval_H(x) - o.eval_H(xp)


# ------------------------------------------------------------ main loop


def ipalm_solve(problem, cfg=None, params=None, x_init=None, lam_init=None, callback=None):
    """Minimize ``F`` subject to the constraint rows.

    Parameters
    ----------
    problem : CompositeProblem
    cfg : InnerSolverConfig, default APG
    params : OuterParams, default ``OuterParams()``
    x_init : array, optional
        Starting point (zeros by default).
    lam_init : DualPoint or array, optional
        Starting multiplier (zeros by default), projected onto ``dom(h*)``.
    callback : callable, optional
        Called as ``callback(s, oracle, x)`` after every inner solve, where
        ``oracle`` describes the subproblem ``H_s`` that ``x = x^s`` approximates.

    Returns
    -------
    x : ndarray
        Final primal iterate ``x^S``.
    lam : DualPoint
        ``lambda^{S+1} = Lambda(A x^S; lambda^S, beta_S)``.
    trace : ConvergenceTrace
    """
    return _solve(problem, cfg, params, x_init, lam_init, callback, kkt=False)


def ipalm_kkt_solve(problem, cfg=None, params=None, x_init=None, lam_init=None, callback=None):
    """Variant with an extra proximal-gradient step after each inner solve.

    Same arguments and return values as :func:`ipalm_solve`; ``params`` must
    have ``kkt_mode=True`` (the default parameters are switched accordingly).
    """
    if params is None:
        params = OuterParams(kkt_mode=True)
    if not params.kkt_mode:
        raise ConfigurationError("ipalm_kkt_solve needs params.kkt_mode=True")
    return _solve(problem, cfg, params, x_init, lam_init, callback, kkt=True)


def _solve(problem, cfg, params, x_init, lam_init, callback, kkt):
    cfg = solvers.InnerSolverConfig() if cfg is None else cfg
    params = OuterParams() if params is None else params
    params.validate()
    if kkt and not params.kkt_mode:
        raise ConfigurationError("KKT solve requested without kkt_mode")
    if params.bounded_domain and problem.d2 > 0:
        raise ConfigurationError("the bounded-domain flag excludes constraint rows")
    try:
        cfg.validate_for(problem)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc

    h = problem.h
    n = problem.n
    rng = np.random.default_rng(cfg.seed)
    x_init = np.zeros(n) if x_init is None else as_vector(x_init, n, "x_init").copy()
    if not math.isfinite(problem.g.value(x_init)):
        x_init = problem.g.prox(x_init, 1.0)
    lam = problem.project_multiplier(DualPoint.zeros(h) if lam_init is None else lam_init)

    trace = ConvergenceTrace()
    t_start = time.perf_counter()
    beta0, rho, eta = params.beta0, params.rho, params.eta
    eps_origin = None  # eps_s == eps_origin * eta**(s - s_origin)
    s_origin = 0

    def cert(o):
        return lambda z: duality_gap_bound(o, z).gap

    # warm start
    o = problem.oracle(lam, beta0, x_init)
    K = solvers.estimate_K(cfg, o)
    m = params.m0 if params.m0 is not None else min(max(1, math.ceil(K)), cfg.safety_cap)
    x, info = solvers.run(cfg, o, x_init, m, rng=rng, return_info=True)
    x_tilde = x
    if kkt:
        x = _kkt_step(o, x_tilde, trace)
    eps = params.eps0 if params.eps0 is not None else estimate_eps0(o, x)
    if callback is not None:
        callback(0, o, x)
    eps_origin = eps
    state = OuterState(0, x_init, x, lam, beta0, eps, cumulative_inner=info["iterations"])
    grad_evals = info["grad_evals"]
    capped = 0

    while True:
        s = state.s
        _check_schedule(state, beta0, rho, eps_origin, eta, s_origin)
        rec = TraceRecord(s, state.beta_s, state.eps_s, K, m,
                          inner_cum=state.cumulative_inner, inner_iters=info["iterations"],
                          grad_evals_cum=grad_evals, early_stopped=info["early_stopped"])
        trace.records.append(rec)

        # quantities of iteration s that need lambda^{s+1}
        u = problem.A.csr @ state.x_cur
        beta_next = state.beta_s * rho
        lam_next = multiplier_update(state, u, h) if h.d else DualPoint.zeros(h)
        lam_probe = lambda_map(h, u, lam_next, beta_next) if h.d else lam_next
        M = compute_M(state, lam_next, lam_probe, beta_next, h)
        state.last_M = M
        rec.M_s = M
        rec.F = problem.objective(state.x_cur)
        rec.infeas = problem.infeasibility(state.x_cur)
        dlam2 = lam_next.lambda2 - state.lam.lambda2
        rec.feas_bound = state.beta_s * float(np.linalg.norm(dlam2))
        if rec.infeas > rec.feas_bound * (1 + 1e-9) + 1e-12:
            trace.surrogate_violations += 1
            logger.warning("feasibility surrogate violated at s=%d: %g > %g", s, rec.infeas, rec.feas_bound)
        L_s = state_oracle_L(problem, state.beta_s)
        kx, kl = kkt_bounds(state, lam_next, state.eps_s, L_s)
        rec.kkt_lam_bound = kl
        if kkt and s > 0:
            rec.kkt_x_bound = kx
        rec.wall_ms = 1000.0 * (time.perf_counter() - t_start)

        if s > 0 and params.target_eps > 0 and _stopping_test(rec, trace.records[-2], params.target_eps,
                                     state.x_cur, state.x_prev):
            trace.status = "converged"
            break
        if s >= params.max_outer:
            trace.status = "max_outer"
            break
        if capped >= 3:
            trace.status = "safety_cap"
            logger.warning("inner safety cap reached in 3 consecutive outer iterations; aborting")
            break

        eps_next = state.eps_s * eta
        o = problem.oracle(lam_next, beta_next, state.x_cur)
        K = solvers.estimate_K(cfg, o)
        m_req = inner_budget(state.eps_s, eps_next, M, K, safety_cap=np.iinfo(np.int64).max)
        capped = capped + 1 if m_req > cfg.safety_cap else 0
        m = min(m_req, cfg.safety_cap)
        early = (cert(o), eps_next) if params.early_stop else None
        x_new, info = solvers.run(cfg, o, state.x_cur, m, early_stop=early, rng=rng, return_info=True)
        grad_evals += info["grad_evals"]
        if kkt:
            x_tilde = x_new
            x_new = _kkt_step(o, x_tilde, trace)
            grad_evals += 1.0
            violated = params.eps_guard and o.eval_H(x_tilde) - o.eval_H(x_new) > eps_next
        else:
            violated = params.eps_guard and _gap_lower_bound(o, x_new) > eps_next
        if violated:
            # the computable lower bound contradicts the schedule: restart it, doubled
            eps_next *= 2.0
            eps_origin, s_origin = eps_next, s + 1
            trace.eps_doublings += 1
        state = OuterState(s + 1, state.x_cur, x_new, lam_next, beta_next, eps_next,
                           cumulative_inner=state.cumulative_inner + info["iterations"])
        if callback is not None:
            callback(s + 1, o, x_new)

    lam_out = lam_next
    return state.x_cur, lam_out, trace


def state_oracle_L(problem, beta):
    return problem.L_f + problem.norm_A ** 2 / beta


def _kkt_step(o, x_tilde, trace):
    x = o.prox_grad_step(x_tilde)
    H_t, H_x = o.eval_H(x_tilde), o.eval_H(x)
    if H_x > H_t + 1e-12 * max(1.0, abs(H_t)):
        trace.monotone_violations += 1
        logger.warning("prox-gradient step increased H: %g > %g", H_x, H_t)
    return x


def _check_schedule(state, beta0, rho, eps_origin, eta, s_origin):
    b = beta0 * rho ** state.s
    e = eps_origin * eta ** (state.s - s_origin)
    if abs(state.beta_s - b) > 1e-12 * b or abs(state.eps_s - e) > 1e-12 * e:
        raise AssertionError("geometric schedule drifted from its closed form")


def _stopping_test(rec, prev, tol, x_cur, x_prev):
    """Feasibility surrogate plus stagnation of both the objective and the iterate."""
    if rec.kkt_lam_bound > tol:
        return False
    change = abs(rec.F - prev.F) / max(1.0, abs(rec.F))
    step = float(np.linalg.norm(x_cur - x_prev)) / max(1.0, float(np.linalg.norm(x_cur)))
    return max(change, step) <= tol
