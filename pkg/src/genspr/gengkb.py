"""Generalized Golub-Kahan bidiagonalization.

``A`` is treated as a map between ``(R^n, <.,.>_{N^{-1}})`` and
``(R^m, <.,.>_{M^{-1}})``.  The process produces ``M^{-1}``-orthonormal
``u_i`` and ``N^{-1}``-orthonormal ``v_i`` together with the preimages
``u_bar_i = M^{-1} u_i`` and ``v_bar_i = N^{-1} v_i``, so that no product
with ``N^{-1}`` is ever needed.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GenGkbState",
    "gengkb_init",
    "gengkb_step",
    "gengkb",
    "bidiag_matrix",
    "krylov_membership_check",
    "BREAKDOWN_TOL",
]

BREAKDOWN_TOL = 1e-14
REORTH_POLICIES = ("full", "none")


@dataclass
class GenGkbState:
    """Running factorization after ``k`` completed steps.

    ``alphas`` and ``betas`` hold ``alpha_1..alpha_{k+1}`` and
    ``beta_1..beta_{k+1}``.  When ``store`` is false only the latest
    vectors are kept.
    """

    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    u_bar: list = field(default_factory=list)
    v_bar: list = field(default_factory=list)
    terminated: bool = False
    reorth: str = "full"
    store: bool = True
    tol: float = 0.0

    @property
    def k(self):
        return max(len(self.alphas) - 1, 0)

    @property
    def U(self):
        return np.column_stack(self.u)

    @property
    def V(self):
        return np.column_stack(self.v)

    @property
    def U_bar(self):
        return np.column_stack(self.u_bar)

    @property
    def V_bar(self):
        return np.column_stack(self.v_bar)

    def B(self, k=None):
        """Lower bidiagonal ``B_k`` of shape ``(k+1, k)``."""
        k = self.k if k is None else k
        return bidiag_matrix(self.alphas[:k], self.betas[1:k + 1])

    def _push(self, name, vec):
        seq = getattr(self, name)
        if not self.store and seq:
            seq[-1] = vec
        else:
            seq.append(vec)


def bidiag_matrix(alphas, betas):
    """Assemble ``B_k`` from ``alpha_1..alpha_k`` and ``beta_2..beta_{k+1}``."""
    k = len(alphas)
    if len(betas) != k:
        raise ValueError("need as many subdiagonal betas as alphas")
    B = np.zeros((k + 1, k))
    B[np.arange(k), np.arange(k)] = alphas
    B[np.arange(1, k + 1), np.arange(k)] = betas
    return B


def _project_out(vec, basis, basis_dual):
    # vec -= sum_j basis_j (basis_dual_j . vec), two passes for stability
    for _ in range(2):
        for q, q_dual in zip(basis, basis_dual):
            vec -= (q_dual @ vec) * q
    return vec


def gengkb_init(A, b, M_inv, N, reorth="full", store=True, breakdown_tol=BREAKDOWN_TOL):
    """Start the process from the data vector ``b``.

    ``breakdown_tol`` is relative to ``max(alpha_1, beta_1)``; ``0`` only
    stops on an exactly vanishing ``alpha`` or ``beta``.

    Raises
    ------
    ValueError
        If ``b`` has zero ``M^{-1}``-norm.
    """
    if reorth not in REORTH_POLICIES:
        raise ValueError(f"reorth must be one of {REORTH_POLICIES}")
    if reorth == "full" and not store:
        raise ValueError("full reorthogonalization needs the stored bases")
    b = np.asarray(b, dtype=float)
    s_bar = M_inv.apply(b)
    beta = np.sqrt(max(float(b @ s_bar), 0.0))
    if beta == 0.0:
        raise ValueError("data vector is zero")
    state = GenGkbState(reorth=reorth, store=store)
    state.betas.append(beta)
    state._push("u", b / beta)
    state._push("u_bar", s_bar / beta)

    r_bar = A.apply_adjoint(state.u_bar[-1])
    r = N.apply(r_bar)
    alpha = np.sqrt(max(float(r @ r_bar), 0.0))
    state.tol = breakdown_tol * max(alpha, beta)
    if alpha <= state.tol:
        # b is M^{-1}-orthogonal to the range of A
        state.alphas.append(0.0)
        state.terminated = True
        return state
    state.alphas.append(alpha)
    state._push("v", r / alpha)
    state._push("v_bar", r_bar / alpha)
    return state


def gengkb_step(state, A, M_inv, N):
    """Advance by one step, appending ``beta_{k+2}``, ``alpha_{k+2}`` and vectors.

    A tiny ``beta`` or ``alpha`` (relative to ``max(alpha_1, beta_1)``) is an
    exact breakdown: the value is recorded as ``0``, the state is flagged as
    terminated and no further vectors are produced.
    """
    if state.terminated:
        raise RuntimeError("gen-GKB has terminated; no further steps possible")
    full = state.reorth == "full"

    s = A.apply(state.v[-1]) - state.alphas[-1] * state.u[-1]
    if full:
        s = _project_out(s, state.u, state.u_bar)
    s_bar = M_inv.apply(s)
    beta = np.sqrt(max(float(s @ s_bar), 0.0))
    if beta <= state.tol:
        state.betas.append(0.0)
        state.alphas.append(0.0)
        state.terminated = True
        return state
    state.betas.append(beta)
    state._push("u", s / beta)
    state._push("u_bar", s_bar / beta)

    r_bar = A.apply_adjoint(state.u_bar[-1]) - beta * state.v_bar[-1]
    if full:
        r_bar = _project_out(r_bar, state.v_bar, state.v)
    r = N.apply(r_bar)
    if full:
        # N r_bar is only accurate to eps * cond(N); project r as well so
        # both triangles of V^T V_bar stay small
        r = _project_out(r, state.v, state.v_bar)
    alpha = np.sqrt(max(float(r @ r_bar), 0.0))
    if alpha <= state.tol:
        state.alphas.append(0.0)
        state.terminated = True
        return state
    state.alphas.append(alpha)
    state._push("v", r / alpha)
    state._push("v_bar", r_bar / alpha)
    return state


def gengkb(A, b, M_inv, N, k, reorth="full", breakdown_tol=BREAKDOWN_TOL):
    """Run ``k`` steps (fewer on breakdown) and return the state."""
    state = gengkb_init(A, b, M_inv, N, reorth=reorth, breakdown_tol=breakdown_tol)
    while state.k < k and not state.terminated:
        gengkb_step(state, A, M_inv, N)
    return state


def krylov_membership_check(state, A, M_inv, N, k, max_dim=2000):
    """Distance of ``v_1..v_k`` from ``K_k(N A^T M^{-1} A, N A^T M^{-1} b)``.

    The Krylov basis is built independently by Euclidean Gram-Schmidt on the
    operator ``N A^T M^{-1} A``.  Returns ``max_i ||(I - P) v_i|| / ||v_i||``.
    Meant for small dense problems only.
    """
    if A.n > max_dim:
        raise ValueError(f"dense Krylov check is capped at n <= {max_dim}")
    if k > len(state.v):
        raise ValueError(f"only {len(state.v)} basis vectors are stored")
    b = state.betas[0] * state.u[0]

    def op(x):
        return N.apply(A.apply_adjoint(M_inv.apply(A.apply(x))))

    q = N.apply(A.apply_adjoint(M_inv.apply(b)))
    Q = np.empty((A.n, k))
    for j in range(k):
        for _ in range(2):
            q = q - Q[:, :j] @ (Q[:, :j].T @ q)
        Q[:, j] = q / np.linalg.norm(q)
        q = op(Q[:, j])
    V = state.V[:, :k]
    resid = V - Q @ (Q.T @ V)
    return float(np.max(np.linalg.norm(resid, axis=0) / np.linalg.norm(V, axis=0)))
