"""Dense verification machinery for small problems.

Everything here factorizes ``M`` and ``N`` explicitly and is therefore
capped at ``n <= 2000``.  With ``M = C C^T`` and ``N = L L^T`` the whitening
matrices are ``L_M = C^{-1}`` and ``L_N = L^{-1}``.

The GSVD of ``{L_M A, L_N}`` is obtained from the ordinary SVD

    L_M A L = U_A Gamma Q^T,

so ``Z = L Q`` satisfies ``Z^T N^{-1} Z = I`` and ``L_M A Z = U_A Gamma``
without ever forming ``N^{-1}``.  ``gamma`` are the generalized singular
values; the unnormalized pair ``sigma = gamma / sqrt(1 + gamma^2)``,
``mu = 1 / sqrt(1 + gamma^2)`` is kept for reference.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular, svd, svdvals
from scipy.optimize import minimize_scalar

from .operators import ForwardOperator, as_spd

__all__ = [
    "GsvdResult",
    "OptimalLambda",
    "MAX_DIM",
    "gsvd_pair",
    "tikhonov_solution",
    "optimal_lambda",
    "tgsvd_solution",
    "projection_solution",
    "ritz_values",
    "filter_factors",
    "filter_factor_solution",
    "subspace_distance",
    "delta_k_distance",
    "gcv_trace",
]

MAX_DIM = 2000
VANDERMONDE_COND_CAP = 1e12


def _dense(A):
    if isinstance(A, ForwardOperator):
        if not A.is_dense:
            raise TypeError("the oracle needs an explicit matrix, not a matrix-free operator")
        A = A.matrix
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-D matrix")
    if max(A.shape) > MAX_DIM:
        raise ValueError(f"oracle is capped at dimension {MAX_DIM}, got {A.shape}")
    return A


def _chol(W, dim, what):
    W = as_spd(W, dim)
    if hasattr(W, "diag"):
        return np.diag(np.sqrt(W.diag))
    try:
        return cholesky(W.to_dense(), lower=True)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} is not numerically positive definite; "
                         "increase the kernel jitter") from None


@dataclass
class GsvdResult:
    """Dense GSVD factors of the pair ``{L_M A, L_N}``.

    Attributes
    ----------
    U_A : ndarray (m, m)
    U_L : ndarray (n, n)
        Equals ``L_N Z``.
    Z : ndarray (n, n)
        ``N^{-1}``-orthonormal right factor.
    gamma : ndarray
        Generalized singular values, descending, length ``min(m, n)``.
    sigma, mu : ndarray
        The pair before normalization, ``sigma^2 + mu^2 = 1``.
    r : int
        Numerical rank of ``L_M A``.
    M_chol, N_chol : ndarray
        Lower Cholesky factors ``C`` of ``M`` and ``L`` of ``N``.
    """

    U_A: np.ndarray
    U_L: np.ndarray
    Z: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    r: int
    M_chol: np.ndarray
    N_chol: np.ndarray
    A: np.ndarray

    def whiten(self, y):
        """``L_M y``."""
        return solve_triangular(self.M_chol, y, lower=True)

    def L_N(self, x):
        """``L_N x = L^{-1} x``."""
        return solve_triangular(self.N_chol, x, lower=True)

    def coefficients(self, b):
        """``U_A^T L_M b`` restricted to the leading ``min(m, n)`` terms."""
        return (self.U_A.T @ self.whiten(np.asarray(b, dtype=float)))[: self.gamma.size]

    def expansion(self, weights, b):
        """``sum_i weights_i (u_{A,i}^T L_M b / gamma_i) z_i`` over ``i <= r``."""
        r = self.r
        c = self.coefficients(b)[:r]
        return self.Z[:, :r] @ (np.asarray(weights)[:r] * c / self.gamma[:r])

    def reconstruction_error(self):
        """``||L_M A - U_A Sigma_A Z^{-1}||_F / ||L_M A||_F``."""
        m, n = self.A.shape
        LA = self.whiten(self.A)
        S = np.zeros((m, n))
        k = self.gamma.size
        S[np.arange(k), np.arange(k)] = self.gamma
        # Z^{-1} = Q^T L^{-1} = U_L^T L_N
        Zinv = self.U_L.T @ solve_triangular(self.N_chol, np.eye(n), lower=True)
        return float(np.linalg.norm(LA - self.U_A @ S @ Zinv) / np.linalg.norm(LA))


def gsvd_pair(A, M=None, N=None, rank_tol=None):
    """GSVD of ``{L_M A, L_N}`` with ``N^{-1}``-orthonormal ``Z``.

    Parameters
    ----------
    A : ndarray or dense ForwardOperator, shape (m, n)
    M, N : SpdAction or array_like, optional
        Noise and prior covariances (not their inverses); identity if omitted.
    rank_tol : float, optional
        Relative threshold on ``gamma`` for the numerical rank.  Defaults to
        ``max(m, n) * eps``.

    Returns
    -------
    GsvdResult
    """
    A = _dense(A)
    m, n = A.shape
    C = _chol(M, m, "M")
    L = _chol(N, n, "N")
    K = solve_triangular(C, A, lower=True) @ L
    U_A, gamma, Qt = svd(K, full_matrices=True)
    Q = Qt.T
    Z = L @ Q
    if rank_tol is None:
        rank_tol = max(m, n) * np.finfo(float).eps
    r = int(np.sum(gamma > rank_tol * gamma[0])) if gamma.size and gamma[0] > 0 else 0
    scale = np.sqrt(1.0 + gamma ** 2)
    return GsvdResult(U_A=U_A, U_L=Q, Z=Z, gamma=gamma, sigma=gamma / scale, mu=1.0 / scale,
                      r=r, M_chol=C, N_chol=L, A=A)


def tikhonov_solution(g, b, lam):
    """Filtered expansion with Tikhonov filters ``gamma^2 / (gamma^2 + lam)``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    gam2 = g.gamma[: g.r] ** 2
    return g.expansion(gam2 / (gam2 + lam), b)


class OptimalLambda(NamedTuple):
    lam: float
    x: np.ndarray
    on_boundary: bool


def optimal_lambda(g, b, x_true, bounds=(1e-12, 1e4), xatol=1e-4):
    """Tikhonov parameter minimizing ``||x_lam - x_true||_2``.

    The search is a bounded scalar minimization over ``log10(lam)``; the
    error is assumed unimodal there.  If an endpoint is at least as good as
    the interior minimizer the endpoint is returned with ``on_boundary``
    set.
    """
    lo, hi = np.log10(bounds[0]), np.log10(bounds[1])
    x_true = np.asarray(x_true, dtype=float)

    def err(t):
        return float(np.linalg.norm(tikhonov_solution(g, b, 10.0 ** t) - x_true))

    res = minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    t, f = float(res.x), float(res.fun)
    edge = False
    for te in (lo, hi):
        fe = err(te)
        if fe <= f:
            t, f, edge = te, fe, True
    if not edge:
        edge = min(t - lo, hi - t) <= 2 * xatol
    lam = 10.0 ** t
    return OptimalLambda(lam, tikhonov_solution(g, b, lam), edge)


def tgsvd_solution(g, b, k):
    """Truncated expansion keeping the ``k`` leading terms, ``1 <= k <= r``."""
    if not 1 <= k <= g.r:
        raise ValueError(f"k must lie in 1..{g.r}, got {k}")
    w = np.zeros(g.r)
    w[:k] = 1.0
    return g.expansion(w, b)


def projection_solution(g, b, W):
    """Weighted least-squares solution restricted to ``span(W)``.

    Solves ``min ||L_M (A W y - b)||_2`` and returns ``W y``.  With
    ``W = Z_k`` this reproduces the truncated expansion.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float).T).T
    y, *_ = np.linalg.lstsq(g.whiten(g.A @ W), g.whiten(np.asarray(b, dtype=float)), rcond=None)
    return W @ y


def ritz_values(B):
    """Singular values of the ``(k+1) x k`` bidiagonal ``B``, descending."""
    B = np.asarray(B, dtype=float)
    theta = svdvals(B)
    if theta.size == 0 or theta[-1] <= np.finfo(float).eps * theta[0] * max(B.shape):
        raise ValueError("B_k is numerically rank deficient")
    return theta


def filter_factors(ritz, g, snap_tol=None):
    """``f_i = 1 - prod_j (theta_j^2 - gamma_i^2) / theta_j^2`` for ``i <= r``.

    A Ritz value within ``snap_tol * gamma_1`` of ``gamma_i`` is treated as
    equal to it, giving ``f_i = 1``.  The computed spectra are only resolved
    to that absolute level, and a difference below it would otherwise be
    amplified by the remaining factors (which grow like
    ``(gamma_i / theta_j)^2``).  The default is ``max(m, n) * eps``.

    Elsewhere, where every ratio ``gamma_i^2 / theta_j^2`` is below one, the
    product is evaluated as ``exp(sum log1p(-t))`` to keep small factors
    accurate.
    """
    theta = np.asarray(ritz, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("Ritz values must be positive")
    if snap_tol is None:
        snap_tol = max(g.A.shape) * np.finfo(float).eps
    gam = g.gamma[: g.r]
    t = gam[:, None] ** 2 / theta[None, :] ** 2
    hit = np.any(np.abs(theta[None, :] - gam[:, None]) <= snap_tol * g.gamma[0], axis=1)
    f = np.ones(g.r)
    small = ~hit & np.all(t < 1.0, axis=1)
    rest = ~hit & ~small
    f[small] = -np.expm1(np.sum(np.log1p(-t[small]), axis=1))
    f[rest] = 1.0 - np.prod(1.0 - t[rest], axis=1)
    return f


def filter_factor_solution(ritz, g, b, snap_tol=None):
    """Expansion ``sum_i f_i^{(k)} (u_{A,i}^T L_M b / gamma_i) z_i``."""
    return g.expansion(filter_factors(ritz, g, snap_tol), b)


def _orth_whitened(F, L):
    F = np.atleast_2d(np.asarray(F, dtype=float).T).T
    Q, R = np.linalg.qr(solve_triangular(L, F, lower=True))
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= max(F.shape) * np.finfo(float).eps * d.max():
        raise ValueError("basis is numerically rank deficient")
    return Q


def subspace_distance(F, G, N=None, N_chol=None):
    """Sine of the largest canonical angle between ``span(F)`` and ``span(G)``.

    Angles are measured in the ``N^{-1}`` inner product by mapping both
    bases through ``L_N``.  Pass ``N_chol`` to reuse a Cholesky factor.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if F.shape != G.shape:
        raise ValueError(f"bases differ in shape: {F.shape} vs {G.shape}")
    n = F.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"oracle is capped at dimension {MAX_DIM}")
    L = _chol(N, n, "N") if N_chol is None else N_chol
    QF, QG = _orth_whitened(F, L), _orth_whitened(G, L)
    return float(np.linalg.norm(QG - QF @ (QF.T @ QG), 2))


def delta_k_distance(g, b, k, coef_tol=1e-14):
    """Distance between the ``k``-th solution subspace and ``span(Z_k)``.

    Forms ``Delta_k = D_2 H_{k2} H_{k1}^{-1} D_1^{-1}`` with
    ``D = diag(gamma_i c_i)``, ``c = U_A^T L_M b`` and the Vandermonde
    matrix ``H_k`` in ``gamma_i^2``, and returns
    ``||Delta_k|| / (1 + ||Delta_k||^2)^{1/2}``.

    ``H_{k2} H_{k1}^{-1}`` is evaluated entrywise as Lagrange basis
    polynomials on the nodes ``gamma_1^2 .. gamma_k^2``, which avoids an
    explicit solve.  A ``RuntimeWarning`` is issued when ``H_{k1}`` is too
    ill-conditioned for the result to be trusted.
    """
    r = g.r
    if not 1 <= k < r:
        raise ValueError(f"k must lie in 1..{r - 1}, got {k}")
    gam = g.gamma[:r]
    c = g.coefficients(b)[:r]
    if np.any(np.abs(c) < coef_tol * np.linalg.norm(c)):
        raise ValueError("a coefficient u_{A,i}^T L_M b vanishes; the distance formula does not apply")
    x = gam ** 2
    nodes = x[:k]
    if np.any(np.diff(nodes) >= 0) or np.min(np.abs(np.subtract.outer(x[k:], nodes)), initial=np.inf) == 0:
        raise ValueError("generalized singular values must be distinct")

    scaled = nodes / nodes[0]
    H1 = np.vander(scaled, k, increasing=True)
    cond = np.linalg.cond(H1)
    if cond > VANDERMONDE_COND_CAP:
        warnings.warn(f"Vandermonde block is ill-conditioned (cond {cond:.1e}) at k={k}; "
                      "the distance may be inaccurate", RuntimeWarning, stacklevel=2)

    # P[i, j] = prod_{l != j} (x_i - x_l) / (x_j - x_l)
    P = np.ones((r - k, k))
    for j in range(k):
        for l in range(k):
            if l != j:
                P[:, j] *= (x[k:] - nodes[l]) / (nodes[j] - nodes[l])
    d = gam * c
    Delta = d[k:, None] * P / d[None, :k]
    nrm = np.linalg.norm(Delta, 2)
    return float(nrm / np.sqrt(1.0 + nrm * nrm))


def gcv_trace(A, M, gkb, k):
    """Dense ``trace(L_M A A_k^+)`` with ``A_k^+ = V_k B_k^+ U_{k+1}^T M^{-1} L_M^{-1}``.

    ``gkb`` is a :class:`~genspr.gengkb.GenGkbState` with stored bases.
    """
    A = _dense(A)
    m = A.shape[0]
    C = _chol(M, m, "M")
    V = gkb.V[:, :k]
    U_bar = gkb.U_bar[:, : k + 1]
    B_pinv = np.linalg.pinv(gkb.B(k))
    # U_{k+1}^T M^{-1} = U_bar^T, and L_M^{-1} = C
    Ak = V @ B_pinv @ (U_bar.T @ C)
    return float(np.trace(solve_triangular(C, A @ Ak, lower=True)))
