"""scikit-learn style estimators for the benchmark families."""

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import OuterParams, ipalm_kkt_solve, ipalm_solve
from .problems import LAD, BasisPursuit, FusedLasso, LabeledDataset, SoftMarginSVM, build_problem
from .solvers import InnerSolverConfig
from .sparse import SparseMatrix

__all__ = ["LeastAbsoluteDeviation", "BasisPursuitRegressor", "FusedLassoRegressor", "L1SoftMarginSVC"]


class _IPALMEstimator(BaseEstimator):
    """Shared fitting logic; subclasses define ``_kind()``."""

    def _solver_params(self):
        cfg = InnerSolverConfig(kind=self.solver, tau=self.tau, seed=self.random_state)
        outer = OuterParams(beta0=self.beta0, rho=self.rho, eta=self.eta, max_outer=self.max_outer,
                            target_eps=self.tol, kkt_mode=self.kkt)
        return cfg, outer

    def _fit_data(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr", dtype=np.float64, y_numeric=True)
        X = sp.csr_matrix(X)
        data = LabeledDataset(SparseMatrix.from_scipy(X), np.asarray(y, dtype=np.float64))
        problem = build_problem(self._kind(), data)
        cfg, outer = self._solver_params()
        solve = ipalm_kkt_solve if self.kkt else ipalm_solve
        x, lam, trace = solve(problem, cfg, outer)
        self.problem_ = problem
        self.solution_ = x
        self.multipliers_ = lam
        self.trace_ = trace
        self.n_iter_ = len(trace) - 1
        self.objective_ = problem.objective(x)
        self.infeasibility_ = problem.infeasibility(x)
        self.n_features_in_ = X.shape[1]
        return x


class _LinearRegressorMixin(RegressorMixin):
    def fit(self, X, y):
        self.coef_ = self._fit_data(X, y)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        return np.asarray(X @ self.coef_).ravel()


_COMMON_DOC = """
    solver : {'apg', 'approx', 'lkatyusha', 'bregman'}, default='apg'
    tau : int, default=1
        Minibatch size for 'lkatyusha'.
    beta0, rho, eta : float
        Outer schedule; ``eta=None`` picks the default for the mode.
    max_outer : int, default=100
    tol : float, default=1e-6
    kkt : bool, default=False
        Use the variant with the extra proximal-gradient step.
    random_state : int, default=0
"""


class LeastAbsoluteDeviation(_LinearRegressorMixin, _IPALMEstimator):
    __doc__ = """Minimize ``||Xw - y||_1 + alpha ||w||_1``.

    Parameters
    ----------
    alpha : float, default=0.01
""" + _COMMON_DOC

    def __init__(self, alpha=0.01, solver="apg", tau=1, beta0=1.0, rho=0.9, eta=None,
                 max_outer=100, tol=1e-6, kkt=False, random_state=0):
        self.alpha = alpha
        self.solver = solver
        self.tau = tau
        self.beta0 = beta0
        self.rho = rho
        self.eta = eta
        self.max_outer = max_outer
        self.tol = tol
        self.kkt = kkt
        self.random_state = random_state

    def _kind(self):
        return LAD(self.alpha)


class BasisPursuitRegressor(_LinearRegressorMixin, _IPALMEstimator):
    __doc__ = """Find the minimum-l1-norm ``w`` with ``Xw = y``.

    Parameters
    ----------
""" + _COMMON_DOC

    def __init__(self, solver="apg", tau=1, beta0=1.0, rho=0.9, eta=None,
                 max_outer=100, tol=1e-6, kkt=False, random_state=0):
        self.solver = solver
        self.tau = tau
        self.beta0 = beta0
        self.rho = rho
        self.eta = eta
        self.max_outer = max_outer
        self.tol = tol
        self.kkt = kkt
        self.random_state = random_state

    def _kind(self):
        return BasisPursuit()


class FusedLassoRegressor(_LinearRegressorMixin, _IPALMEstimator):
    __doc__ = """Minimize ``1/2 ||Xw - y||^2 + l1 ||w||_1 + fused sum_i |w_i - w_{i+1}|``.

    Parameters
    ----------
    l1 : float, default=0.01
    fused : float, default=0.01
    ridge : float, default=0.0
        Optional ``ridge/2 ||w||^2`` term, which makes the problem strongly convex.
""" + _COMMON_DOC

    def __init__(self, l1=0.01, fused=0.01, ridge=0.0, solver="apg", tau=1, beta0=1.0,
                 rho=0.9, eta=None, max_outer=100, tol=1e-6, kkt=False, random_state=0):
        self.l1 = l1
        self.fused = fused
        self.ridge = ridge
        self.solver = solver
        self.tau = tau
        self.beta0 = beta0
        self.rho = rho
        self.eta = eta
        self.max_outer = max_outer
        self.tol = tol
        self.kkt = kkt
        self.random_state = random_state

    def _kind(self):
        return FusedLasso(self.l1, self.fused, self.ridge)


class L1SoftMarginSVC(ClassifierMixin, _IPALMEstimator):
    __doc__ = """Linear SVM with hinge loss and l1 penalty on the weights.

    Minimizes ``mean_i max(0, 1 - y_i (x_i^T w - b)) + alpha ||w||_1`` with
    labels mapped to ``{-1, +1}``.

    Parameters
    ----------
    alpha : float, default=0.01
""" + _COMMON_DOC

    def __init__(self, alpha=0.01, solver="apg", tau=1, beta0=1.0, rho=0.9, eta=None,
                 max_outer=100, tol=1e-6, kkt=False, random_state=0):
        self.alpha = alpha
        self.solver = solver
        self.tau = tau
        self.beta0 = beta0
        self.rho = rho
        self.eta = eta
        self.max_outer = max_outer
        self.tol = tol
        self.kkt = kkt
        self.random_state = random_state

    def _kind(self):
        return SoftMarginSVM(self.alpha)

    def fit(self, X, y):
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError("L1SoftMarginSVC needs exactly two classes")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        z = self._fit_data(X, signs)
        self.coef_ = z[:-1]
        self.intercept_ = -z[-1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        return np.asarray(X @ self.coef_).ravel() + self.intercept_

    def predict(self, X):
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]
