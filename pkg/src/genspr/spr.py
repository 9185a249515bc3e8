"""Subspace projection regularization on top of gen-GKB.

At step ``k`` the iterate ``x_k = V_k y_k`` solves the projected problem
``min ||B_k y - beta_1 e_1||_2``.  A running Givens QR of ``B_k`` updates
``x_k``, ``x_bar_k = N^{-1} x_k``, the residual norm ``||A x_k - b||_{M^{-1}}``
and the solution norm ``||x_k||_{N^{-1}}`` with vector updates only.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .gengkb import BREAKDOWN_TOL, gengkb_init, gengkb_step
from .operators import as_forward_operator, as_spd
from .stopping import StopConfig, gcv_value, select_k

__all__ = [
    "SprState",
    "SolveResult",
    "spr_init",
    "spr_update",
    "solution_norm",
    "spr_solve",
    "solve",
    "HISTORY_COLUMNS",
]

HISTORY_COLUMNS = ("k", "phi_bar", "sol_norm", "gcv", "rel_error")


@dataclass
class SprState:
    """Iterate ``x_k`` with the Givens quantities carried to the next step."""

    x: np.ndarray
    x_bar: np.ndarray
    w: np.ndarray
    w_bar: np.ndarray
    rho_bar: float
    phi_bar: float
    k: int = 0
    rho: float = np.nan
    theta: float = np.nan
    phi: float = np.nan
    c: float = np.nan
    s: float = np.nan


def spr_init(alpha1, beta1, v1, v1_bar):
    """State for ``x_0 = 0`` with ``w_1 = v_1``, ``phi_bar_1 = beta_1``, ``rho_bar_1 = alpha_1``."""
    v1 = np.asarray(v1, dtype=float)
    return SprState(x=np.zeros_like(v1), x_bar=np.zeros_like(v1), w=v1.copy(),
                    w_bar=np.array(v1_bar, dtype=float), rho_bar=float(alpha1),
                    phi_bar=float(beta1))


def spr_update(state, beta_next, alpha_next, v_next, v_bar_next):
    """One Givens step: from ``x_{k}`` to ``x_{k+1}``.

    ``beta_next``, ``alpha_next``, ``v_next`` and ``v_bar_next`` are
    ``beta_{k+2}``, ``alpha_{k+2}``, ``v_{k+2}`` and ``v_bar_{k+2}`` in the
    1-based numbering of the bidiagonalization.  The state is updated in
    place and returned.
    """
    rho = np.hypot(state.rho_bar, beta_next)
    if rho == 0.0:
        raise ZeroDivisionError("rho vanished; the bidiagonalization broke down earlier")
    c = state.rho_bar / rho
    s = beta_next / rho
    theta = s * alpha_next
    phi = c * state.phi_bar
    step = phi / rho
    ratio = theta / rho

    state.x = state.x + step * state.w
    state.x_bar = state.x_bar + step * state.w_bar
    state.w = v_next - ratio * state.w
    state.w_bar = v_bar_next - ratio * state.w_bar
    state.rho_bar = -c * alpha_next
    state.phi_bar = s * state.phi_bar
    state.rho, state.theta, state.phi, state.c, state.s = rho, theta, phi, c, s
    state.k += 1
    return state


def solution_norm(state):
    """``||x_k||_{N^{-1}} = (x_k^T x_bar_k)^{1/2}``, no ``N^{-1}`` solve."""
    return float(np.sqrt(max(float(state.x @ state.x_bar), 0.0)))


@dataclass
class SolveResult:
    """Outcome of an SPR run.

    ``history`` is a dict of per-iteration lists keyed by
    :data:`HISTORY_COLUMNS`; ``termination`` is ``"rule"``, ``"breakdown"``
    or ``"k_max"``.
    """

    x: np.ndarray
    k_stop: int
    rule: StopConfig
    history: dict
    termination: str
    committed: bool = True
    iterates: list = field(default=None, repr=False)
    gkb: object = field(default=None, repr=False)
    _rerun: object = field(default=None, repr=False)

    @property
    def n_iter(self):
        return len(self.history["k"])

    def solution_at(self, k):
        """Iterate ``x_k`` for ``0 <= k <= n_iter``."""
        if not 0 <= k <= self.n_iter:
            raise IndexError(f"iteration {k} outside 0..{self.n_iter}")
        if k == 0:
            return np.zeros_like(self.x)
        if self.iterates is not None:
            return self.iterates[k - 1]
        if self.gkb is not None and self.gkb.store:
            return _replay(self.gkb, k)
        return self._rerun(k)

    def to_csv(self, path):
        write_history_csv(self.history, path)


def _replay(gkb, k):
    # rebuild x_k from stored alphas, betas and V columns
    st = spr_init(gkb.alphas[0], gkb.betas[0], gkb.v[0], gkb.v_bar[0])
    zero = np.zeros_like(gkb.v[0])
    for i in range(k):
        has_next = i + 1 < len(gkb.v)
        spr_update(st, gkb.betas[i + 1], gkb.alphas[i + 1],
                   gkb.v[i + 1] if has_next else zero,
                   gkb.v_bar[i + 1] if has_next else zero)
    return st.x


def write_history_csv(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for i in range(len(history["k"])):
            row = [history["k"][i]]
            for col in HISTORY_COLUMNS[1:]:
                val = history[col][i]
                row.append("" if val is None else repr(float(val)))
            writer.writerow(row)


def spr_solve(A, b, M_inv=None, N=None, stop=None, k_max=100, x_true=None,
              reorth="full", keep_iterates=True, store_basis=True,
              breakdown_tol=BREAKDOWN_TOL):
    """Run gen-GKB + SPR until ``stop`` fires, breakdown, or ``k_max``.

    Parameters
    ----------
    A : ForwardOperator, LinearOperator or array
    b : ndarray, shape (m,)
    M_inv : SpdAction or array_like, optional
        Noise precision ``M^{-1}``; identity if omitted.
    N : SpdAction or array_like, optional
        Prior covariance ``N``; identity if omitted.
    stop : StopConfig, optional
        Defaults to the discrepancy principle with ``tau = 1.01``.
    k_max : int
    x_true : ndarray, optional
        Only used to record relative errors; never consulted by DP/LC/GCV.
    reorth : {"full", "none"}
    keep_iterates : bool
        Keep every ``x_k`` so LC/GCV can return an earlier iterate directly.
    store_basis : bool
        Keep all gen-GKB vectors.  Must be true for ``reorth="full"``.
    breakdown_tol : float
        Relative breakdown threshold passed to the bidiagonalization.

    Returns
    -------
    SolveResult
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    stop = StopConfig() if stop is None else stop
    A = as_forward_operator(A)
    b = np.asarray(b, dtype=float)
    M_inv = as_spd(M_inv, A.m)
    N = as_spd(N, A.n)
    if stop.rule == "best" and x_true is None:
        raise ValueError("the 'best' rule needs x_true")
    xt_norm = None if x_true is None else float(np.linalg.norm(x_true))

    gkb = gengkb_init(A, b, M_inv, N, reorth=reorth, store=store_basis,
                      breakdown_tol=breakdown_tol)
    history = {c: [] for c in HISTORY_COLUMNS}
    iterates = [] if keep_iterates else None

    def rerun(k):
        return spr_solve(A, b, M_inv, N, StopConfig(rule="none"), k_max=k, reorth=reorth,
                         keep_iterates=False, store_basis=store_basis,
                         breakdown_tol=breakdown_tol).x

    if gkb.terminated:
        return SolveResult(np.zeros(A.n), 0, stop, history, "breakdown", False,
                           iterates, gkb if store_basis else None, rerun)

    st = spr_init(gkb.alphas[0], gkb.betas[0], gkb.v[-1], gkb.v_bar[-1])
    termination = "k_max"
    chosen = None
    while st.k < k_max:
        gengkb_step(gkb, A, M_inv, N)
        if gkb.terminated:
            v_next = v_bar_next = np.zeros(A.n)
        else:
            v_next, v_bar_next = gkb.v[-1], gkb.v_bar[-1]
        spr_update(st, gkb.betas[-1], gkb.alphas[-1], v_next, v_bar_next)

        k = st.k
        history["k"].append(k)
        history["phi_bar"].append(st.phi_bar)
        history["sol_norm"].append(solution_norm(st))
        history["gcv"].append(gcv_value(st.phi_bar, A.m, k) if k < A.m else np.nan)
        history["rel_error"].append(
            None if x_true is None else float(np.linalg.norm(st.x - x_true)) / xt_norm)
        if keep_iterates:
            iterates.append(st.x.copy())

        if stop.rule in ("DP", "LC", "GCV"):
            k_sel, done = select_k(history, stop, A.m)
            if done:
                chosen = k_sel
                termination = "rule"
                break
        if gkb.terminated:
            termination = "breakdown"
            break

    if chosen is None:
        chosen, committed = select_k(history, stop, A.m)
    else:
        committed = True
    result = SolveResult(st.x.copy(), chosen, stop, history, termination, committed,
                         iterates, gkb if store_basis else None, rerun)
    if chosen != st.k:
        result.x = result.solution_at(chosen)
    return result


def solve(problem, stop=None, k_max=100, reorth="full", keep_iterates=True,
          store_basis=True):
    """:func:`spr_solve` on an :class:`~genspr.problems.InverseProblem`."""
    return spr_solve(problem.A, problem.b, problem.M_inv, problem.N, stop=stop,
                     k_max=k_max, x_true=problem.x_true, reorth=reorth,
                     keep_iterates=keep_iterates, store_basis=store_basis)
