"""Early stopping rules: discrepancy principle, L-curve corner, GCV.

All selection helpers work on per-iteration series whose entry ``i``
belongs to iteration ``k = i + 1`` and they return that 1-based ``k``.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

__all__ = [
    "StopConfig",
    "RULES",
    "dp_check",
    "dp_select",
    "lcurve_curvature",
    "lcurve_corner",
    "lcurve_select",
    "gcv_value",
    "gcv_select",
    "select_k",
]

RULES = ("DP", "LC", "GCV", "best", "none")


@dataclass(frozen=True)
class StopConfig:
    """Which rule to use and its knobs.

    ``lookahead`` is how many iterations past the current LC/GCV candidate
    must pass without a new candidate before the choice is committed.
    ``window`` is the moving-average width applied to the L-curve.
    ``best`` picks the iterate closest to a known ``x_true`` and exists for
    benchmarking only.
    """

    rule: str = "DP"
    tau: float = 1.01
    lookahead: int = 10
    window: int = 3

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown stopping rule {self.rule!r}; choose from {RULES}")
        if self.rule == "DP" and not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if self.lookahead < 1:
            raise ValueError("lookahead must be at least 1")
        if self.window < 1:
            raise ValueError("window must be at least 1")

    def to_dict(self):
        return asdict(self)


def dp_check(phi_bar, m, tau=1.01):
    """True iff ``phi_bar <= tau * sqrt(m)``."""
    if m < 1:
        raise ValueError("m must be positive")
    if not tau > 1:
        raise ValueError(f"tau must exceed 1, got {tau}")
    return bool(phi_bar <= tau * np.sqrt(m))


def dp_select(phi_bars, m, tau=1.01):
    """First ``k`` satisfying the discrepancy principle, or ``None``."""
    for i, phi in enumerate(phi_bars):
        if dp_check(phi, m, tau):
            return i + 1
    return None


def lcurve_curvature(log_residuals, log_norms, window=3):
    """Signed Menger curvature of the smoothed L-curve at interior points.

    The sign is chosen so that the corner of an L traversed with decreasing
    residual and increasing norm is positive.  Endpoints get ``-inf``.
    """
    x = np.asarray(log_residuals, dtype=float)
    y = np.asarray(log_norms, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if x.size < 5:
        raise ValueError(f"L-curve needs at least 5 points, got {x.size}")
    if window > 1:
        x = uniform_filter1d(x, window, mode="nearest")
        y = uniform_filter1d(y, window, mode="nearest")
    ax, ay = x[1:-1] - x[:-2], y[1:-1] - y[:-2]
    bx, by = x[2:] - x[1:-1], y[2:] - y[1:-1]
    cx, cy = x[2:] - x[:-2], y[2:] - y[:-2]
    cross = ax * by - ay * bx
    denom = np.hypot(ax, ay) * np.hypot(bx, by) * np.hypot(cx, cy)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(denom > 0, -2.0 * cross / denom, 0.0)
    return np.concatenate([[-np.inf], kappa, [-np.inf]])


def lcurve_corner(log_residuals, log_norms, window=3):
    """Iteration ``k`` of maximum curvature; ties go to the smallest ``k``."""
    kappa = lcurve_curvature(log_residuals, log_norms, window)
    return int(np.argmax(kappa)) + 1


def lcurve_select(phi_bars, sol_norms, window=3, lookahead=10):
    """Online L-curve choice: commit once the corner is ``lookahead`` behind.

    Returns ``(k, committed)``.  Before five points exist the last ``k`` is
    returned uncommitted.
    """
    tiny = np.finfo(float).tiny
    lr = np.log(np.maximum(np.asarray(phi_bars, dtype=float), tiny))
    ln = np.log(np.maximum(np.asarray(sol_norms, dtype=float), tiny))
    corner = len(lr)
    for K in range(5, len(lr) + 1):
        corner = lcurve_corner(lr[:K], ln[:K], window)
        if K - corner >= lookahead:
            return corner, True
    return corner, False


def gcv_value(phi_bar, m, k):
    """``GCV(k) = phi_bar^2 / (m - k)^2``."""
    if k >= m:
        raise ValueError(f"GCV needs k < m, got k={k}, m={m}")
    return float(phi_bar) ** 2 / float(m - k) ** 2


def gcv_select(gcv_series, lookahead=10):
    """Argmin of the GCV series, scanned online.

    The scan commits to the running minimizer once ``lookahead`` further
    values have failed to improve on it; otherwise the minimizer over the
    whole series is returned.  Ties go to the smallest ``k``.
    """
    g = np.asarray(gcv_series, dtype=float)
    if g.size == 0:
        raise ValueError("empty GCV series")
    best = 0
    for i in range(1, g.size):
        if i - best >= lookahead:
            break
        if g[i] < g[best]:
            best = i
    return best + 1


def select_k(history, config, m):
    """Apply ``config`` to a finished history.

    ``history`` maps ``phi_bar``, ``sol_norm``, ``gcv`` and optionally
    ``rel_error`` to per-iteration sequences.  Returns ``(k, committed)``:
    ``committed`` is false when the rule never fired and the last iterate
    is returned as a fallback.
    """
    phi = np.asarray(history["phi_bar"], dtype=float)
    K = phi.size
    if K == 0:
        return 0, False
    rule = config.rule
    if rule == "none":
        return K, False
    if rule == "DP":
        k = dp_select(phi, m, config.tau)
        return (k, True) if k is not None else (K, False)
    if rule == "GCV":
        k = gcv_select(history["gcv"], config.lookahead)
        return k, K - k >= config.lookahead
    if rule == "LC":
        if K < 5:
            return K, False
        return lcurve_select(phi, history["sol_norm"], config.window, config.lookahead)
    rel = history.get("rel_error")
    if rel is None or any(e is None for e in rel):
        raise ValueError("the 'best' rule needs x_true")
    return int(np.argmin(rel)) + 1, True
