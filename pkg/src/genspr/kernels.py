"""Stationary covariance kernels and prior covariance assembly."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gamma, kv

from .operators import KernelSpd

__all__ = ["KernelSpec", "kernel_eval", "build_covariance", "MATERN_ORDERS"]

MATERN_ORDERS = (0.5, 1.5, 2.5)
FAMILIES = ("gaussian", "exponential", "matern")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with length scale ``l`` and smoothness/exponent ``nu``.

    For ``exponential`` the kernel is ``exp(-(r/l)**nu)``; ``nu = 1`` is the
    usual exponential kernel.  For ``matern`` the half-integer orders in
    :data:`MATERN_ORDERS` use closed forms and other orders the Bessel
    form.  ``nu`` is ignored by ``gaussian``.
    """

    family: str = "gaussian"
    l: float = 0.1
    nu: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if not self.l > 0:
            raise ValueError(f"length scale must be positive, got {self.l}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def kernel_eval(spec, r):
    """Evaluate ``amplitude * kappa(r)`` elementwise for distances ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distances must be non-negative")
    u = r / spec.l
    if spec.family == "gaussian":
        k = np.exp(-0.5 * u * u)
    elif spec.family == "exponential":
        k = np.exp(-u ** spec.nu)
    elif np.isclose(spec.nu, 0.5):
        k = np.exp(-u)
    elif np.isclose(spec.nu, 1.5):
        a = np.sqrt(3.0) * u
        k = (1.0 + a) * np.exp(-a)
    elif np.isclose(spec.nu, 2.5):
        a = np.sqrt(5.0) * u
        k = (1.0 + a + a * a / 3.0) * np.exp(-a)
    else:
        a = np.sqrt(2.0 * spec.nu) * u
        with np.errstate(invalid="ignore", over="ignore"):
            k = 2.0 ** (1.0 - spec.nu) / gamma(spec.nu) * a ** spec.nu * kv(spec.nu, a)
        # the r = 0 limit is 1; far out kv underflows to 0
        k = np.where(a == 0, 1.0, np.nan_to_num(k, nan=0.0))
    k = spec.amplitude * k
    return float(k) if k.ndim == 0 else k


def build_covariance(points, spec, jitter=None):
    """Assemble ``N_ij = kappa(||p_i - p_j||) + jitter * delta_ij``.

    Parameters
    ----------
    points : array_like, shape (n,) or (n, d)
        Discretization points.
    spec : KernelSpec
    jitter : float, optional
        Diagonal shift; defaults to ``1e-10 * spec.amplitude``.

    Returns
    -------
    KernelSpd
        Exactly symmetric, verified to admit a Cholesky factorization.

    Raises
    ------
    ValueError
        If the matrix is not numerically positive definite.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] == 0:
        raise ValueError("need at least one point")
    if not np.all(np.isfinite(P)):
        raise ValueError("points must be finite")
    if jitter is None:
        jitter = 1e-10 * spec.amplitude
    if jitter < 0:
        raise ValueError("jitter must be non-negative")

    K = kernel_eval(spec, cdist(P, P))
    K = np.atleast_2d(K)
    # mirror the upper triangle so symmetry is exact
    iu = np.triu_indices_from(K, 1)
    K.T[iu] = K[iu]
    K[np.diag_indices_from(K)] = spec.amplitude + jitter
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"covariance is not numerically positive definite (jitter={jitter:g}); "
            "increase the jitter") from None
    return KernelSpd(K, spec=spec, points=P)
