"""Computable optimality certificates and error metrics.

The subproblem ``H(x) = Psi(x) + sum_j Phi_j(B_j x)`` with
``Psi = g + beta/2 ||. - anchor||^2`` has the Fenchel dual::

    D(y) = -Psi*(-B^T y) - sum_j Phi_j*(y_j)

so any dual point gives ``H(x) - min H <= H(x) - D(y)``. The dual point is built
from ``x`` (gradients of the smooth row losses, the multiplier map for the
smoothed rows) and clipped into the conjugate domains.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sparse import as_vector

__all__ = [
    "GapCertificate",
    "ErrorReport",
    "duality_gap_bound",
    "kkt_bounds",
    "error_report",
]


@dataclass(frozen=True)
class GapCertificate:
    primal_value: float
    dual_value: float

    @property
    def gap(self):
        return self.primal_value - self.dual_value


def duality_gap_bound(o, x):
    """Weak-duality certificate for ``H(x) - min H`` at oracle `o`.

    Returns
    -------
    GapCertificate
        ``gap`` is an upper bound on the optimality gap of `x` (it can be
        ``inf`` only if a clipped dual point still fails a conjugate domain
        check because of rounding).
    """
    p = o.problem
    x = as_vector(x, p.n)
    beta = o.beta
    A = p.A_all.csr
    u = A @ x
    y = o.row_derivatives(u)
    d0 = p.d0
    y0 = y[:d0]
    yh = y[d0:]
    h = p.h
    y1 = h.h1.project_conjugate_domain(yh[: h.d1]) if h.d1 else np.zeros(0)
    y2 = h.K.project_support_domain(yh[h.d1:]) if h.d2 else np.zeros(0)
    yh = np.concatenate([y1, y2])
    y = np.concatenate([y0, yh])

    z = -np.asarray(A.T @ y)
    x_hat = p.g.prox(o.anchor + z / beta, 1.0 / beta)
    dx = x_hat - o.anchor
    psi_conj = float(z @ x_hat) - p.g.value(x_hat) - 0.5 * beta * float(dx @ dx)

    conj = 0.5 * float(y0 @ y0) + float(y0 @ p.c_smooth)
    if h.d1:
        conj += h.h1.conjugate(y1)
    if h.d2:
        conj += h.K.support(y2)
    dl = yh - o.lam.vector()
    conj += 0.5 * beta * float(dl @ dl)

    primal = o.eval_H(x)
    return GapCertificate(primal, -psi_conj - conj)


def kkt_bounds(state, lam_next, gap_bound, L_s):
    """Upper bounds on the two partial KKT residuals at ``state.x_cur``.

    Returns ``(sqrt(16 L_s gap + 2 beta^2 ||x^s - x^{s-1}||^2), beta ||lam_next - lam||)``.
    """
    dx = state.x_cur - state.x_prev
    dl = (lam_next - state.lam).norm()
    beta = state.beta_s
    x_bound = math.sqrt(max(16.0 * L_s * gap_bound, 0.0) + 2.0 * beta ** 2 * float(dx @ dx))
    return x_bound, beta * dl


@dataclass(frozen=True)
class ErrorReport:
    """Relative error of ``F_value`` against a bracket ``[F_lower, F_upper]`` of the optimum.

    ``log_rel_error`` is ``log10(|F - F_upper| / F_upper)`` when ``F`` is above
    the confidence level, and ``nan`` otherwise (``below_confidence`` is then
    true).
    """

    F_value: float
    F_lower: float
    F_upper: float
    confidence_error: float
    log_rel_error: float
    below_confidence: bool

    @property
    def rel_error(self):
        """``(F - F_upper) / F_upper``, the quantity whose log is reported."""
        return (self.F_value - self.F_upper) / self.F_upper

    def true_error_bounds(self):
        """Interval that contains ``(F - F*) / F*`` whenever ``F_lower <= F* <= F_upper``."""
        eps, ec = self.rel_error, self.confidence_error
        return eps, ec + (1.0 + ec) * eps


def error_report(F_value, F_lower, F_upper):
    if not F_lower > 0:
        raise ValueError("F_lower must be positive")
    if F_lower > F_upper:
        raise ValueError("F_lower must not exceed F_upper")
    ec = (F_upper - F_lower) / F_lower
    if F_value > (1.0 + ec) * F_upper:
        log_err = math.log10(abs(F_value - F_upper) / F_upper)
        below = False
    else:
        log_err = float("nan")
        below = True
    return ErrorReport(float(F_value), float(F_lower), float(F_upper), ec, log_err, below)
