"""Estimator-style wrapper around the SPR solver.

The forward matrix plays the role of the design matrix ``X`` and the data
vector that of the target ``y``; the fitted coefficients are the
regularized solution ``x_k``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .operators import ForwardOperator
from .spr import spr_solve
from .stopping import StopConfig

__all__ = ["SPRRegressor"]


def _is_operator(X):
    # matrix-free inputs skip array validation
    return isinstance(X, ForwardOperator) or hasattr(X, "matvec")


class SPRRegressor(RegressorMixin, BaseEstimator):
    """Iterative regularization of ``b = A x + eps`` by early-stopped SPR.

    Parameters
    ----------
    noise_precision : SpdAction, array_like or None
        ``M^{-1}``: a scalar, a diagonal, a dense matrix or an SPD action.
        ``None`` means the identity.
    prior_cov : SpdAction, array_like or None
        ``N`` in the same forms.
    rule : {"DP", "LC", "GCV", "none"}
    tau : float
        Discrepancy-principle safety factor, must exceed 1.
    k_max : int
    lookahead : int
        Iterations past an LC/GCV candidate before committing.
    window : int
        L-curve smoothing width.
    reorth : {"full", "none"}

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    k_stop_ : int
        Selected iteration.
    n_iter_ : int
        Iterations actually run.
    history_ : dict
    result_ : SolveResult
    """

    def __init__(self, noise_precision=None, prior_cov=None, rule="DP", tau=1.01, k_max=100,
                 lookahead=10, window=3, reorth="full"):
        self.noise_precision = noise_precision
        self.prior_cov = prior_cov
        self.rule = rule
        self.tau = tau
        self.k_max = k_max
        self.lookahead = lookahead
        self.window = window
        self.reorth = reorth

    def fit(self, X, y):
        """Run the solver with forward operator ``X`` and data ``y``.

        ``X`` may also be a :class:`ForwardOperator` or a SciPy
        ``LinearOperator``; those skip array validation.
        """
        if self.rule == "best":
            raise ValueError("the 'best' rule needs x_true and is not available here")
        stop = StopConfig(rule=self.rule, tau=self.tau, lookahead=self.lookahead,
                          window=self.window)
        if _is_operator(X):
            y = np.asarray(y, dtype=float)
            self.n_features_in_ = X.shape[1]
        else:
            X, y = validate_data(self, X, y, y_numeric=True)
        res = spr_solve(X, y, self.noise_precision, self.prior_cov, stop=stop,
                        k_max=self.k_max, reorth=self.reorth)
        self.result_ = res
        self.coef_ = res.x
        self.k_stop_ = res.k_stop
        self.n_iter_ = res.n_iter
        self.history_ = res.history
        return self

    def predict(self, X):
        """``X @ coef_``."""
        check_is_fitted(self, "coef_")
        if isinstance(X, ForwardOperator):
            return X.apply(self.coef_)
        if _is_operator(X):
            return X.matvec(self.coef_)
        X = validate_data(self, X, reset=False)
        return X @ self.coef_
