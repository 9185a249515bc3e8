"""Test problems: gravity, shaw, a separable 2-D blur, and seeded noise.

Noise is drawn with ``numpy.random.Generator(PCG64(seed))``; normal
variates come from ``Generator.standard_normal`` (ziggurat) and the
diagonal weights from ``Generator.integers``.  Both are stable for a fixed
NumPy release, which is what the golden files rely on.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelSpec, build_covariance
from .operators import (
    DenseSpd,
    DiagonalSpd,
    ForwardOperator,
    read_matrix,
    write_matrix,
)

__all__ = [
    "InverseProblem",
    "gravity_kernel",
    "gravity_problem",
    "shaw_kernel",
    "shaw_problem",
    "blur2d_problem",
    "add_noise_white",
    "add_noise_diagonal",
    "make_problem",
    "save_problem",
    "load_problem",
]

GRAVITY_DEPTH = 0.25


@dataclass
class InverseProblem:
    """Everything needed to run a solve and score it."""

    A: ForwardOperator
    b: np.ndarray
    b_true: np.ndarray
    x_true: np.ndarray
    M_inv: object
    M: object
    N: object
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m, n = self.A.m, self.A.n
        if self.b.shape != (m,) or self.b_true.shape != (m,):
            raise ValueError("data vectors must have length m")
        if self.x_true.shape != (n,):
            raise ValueError("x_true must have length n")
        if self.M_inv.dim != m or self.M.dim != m or self.N.dim != n:
            raise ValueError("covariance orders do not match the operator")

    @property
    def noise(self):
        return self.b - self.b_true


def _midpoints(n, a, b):
    h = (b - a) / n
    return a + h * (np.arange(n) + 0.5), h


def gravity_kernel(s, t, d=GRAVITY_DEPTH):
    return d * (d * d + (s - t) ** 2) ** -1.5


def gravity_problem(n):
    """One-dimensional gravity surveying on ``[0, 1]``, midpoint rule.

    Returns ``(A, x_true, b_true, points)`` with ``A`` dense ``n x n``.
    """
    if n < 2:
        raise ValueError("gravity needs n >= 2")
    t, h = _midpoints(n, 0.0, 1.0)
    A = h * gravity_kernel(t[:, None], t[None, :])
    x_true = np.sin(np.pi * t) + 0.5 * np.sin(2 * np.pi * t)
    A = ForwardOperator.from_dense(A)
    return A, x_true, A.apply(x_true), t


def shaw_kernel(s, t):
    u = np.pi * (np.sin(s) + np.sin(t))
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-8
    safe = np.where(small, 1.0, u)
    sinc = np.where(small, 1.0, np.sin(safe) / safe)
    return (np.cos(s) + np.cos(t)) ** 2 * sinc ** 2


def shaw_problem(n):
    """One-dimensional image restoration on ``[-pi/2, pi/2]``, midpoint rule."""
    if n < 2:
        raise ValueError("shaw needs n >= 2")
    t, h = _midpoints(n, -np.pi / 2, np.pi / 2)
    A = h * shaw_kernel(t[:, None], t[None, :])
    x_true = 2 * np.exp(-6 * (t - 0.8) ** 2) + np.exp(-2 * (t + 0.5) ** 2)
    A = ForwardOperator.from_dense(A)
    return A, x_true, A.apply(x_true), t


def _blur_matrix(n1, width):
    """1-D Gaussian blur (zero boundary) with standard deviation ``width`` pixels."""
    if width <= 0:
        return np.eye(n1)
    i = np.arange(n1)
    T = np.exp(-0.5 * ((i[:, None] - i[None, :]) / width) ** 2)
    T[T < 1e-14] = 0.0
    # every interior row sums to one; rows near the edge lose mass
    full = np.exp(-0.5 * (np.arange(-n1 + 1, n1) / width) ** 2)
    full[full < 1e-14] = 0.0
    return T / full.sum()


def _bump_image(X, Y):
    bumps = ((0.7, 0.35, 0.45, 0.12, 0.15),
             (1.0, 0.70, 0.75, 0.10, 0.08),
             (0.5, 0.60, 0.25, 0.08, 0.10))
    img = np.zeros_like(X)
    for amp, cx, cy, sx, sy in bumps:
        img += amp * np.exp(-((X - cx) / sx) ** 2 - ((Y - cy) / sy) ** 2)
    return img


def blur2d_problem(n1, blur_width=2.0):
    """Separable Gaussian blur of an ``n1 x n1`` image of Gaussian bumps.

    ``A`` acts as ``X -> T X T`` on the image with the symmetric 1-D blur
    ``T``; it is never formed.  Images are flattened in row-major order.
    ``blur_width`` is the blur standard deviation in pixels; ``0`` gives the
    identity.
    """
    if n1 < 8:
        raise ValueError("blur2d needs n1 >= 8")
    T = _blur_matrix(n1, blur_width)
    T.setflags(write=False)

    def apply(x):
        if x.ndim == 1:
            return (T @ x.reshape(n1, n1) @ T).ravel()
        return np.column_stack([apply(c) for c in x.T])

    # T is symmetric, so the blur is self-adjoint
    A = ForwardOperator(n1 * n1, n1 * n1, apply, apply)
    A.blur_1d = T
    c, _ = _midpoints(n1, 0.0, 1.0)
    X, Y = np.meshgrid(c, c, indexing="ij")
    x_true = _bump_image(X, Y).ravel()
    points = np.column_stack([X.ravel(), Y.ravel()])
    return A, x_true, A.apply(x_true), points


def add_noise_white(b_true, level, seed):
    """White noise with ``sqrt(m) sigma / ||b_true|| = level``.

    Returns ``(b, M_inv, M)`` with ``M = sigma^2 I``.
    """
    b_true = np.asarray(b_true, dtype=float)
    if level <= 0:
        raise ValueError("noise level must be positive")
    nrm = np.linalg.norm(b_true)
    if nrm == 0:
        raise ValueError("noise level is undefined for zero data")
    m = b_true.size
    sigma = level * nrm / np.sqrt(m)
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = sigma * rng.standard_normal(m)
    var = np.full(m, sigma * sigma)
    return b_true + eps, DiagonalSpd(1.0 / var), DiagonalSpd(var)


def add_noise_diagonal(b_true, level, seed):
    """Non-white diagonal noise ``M = diag(gamma d)`` with ``d_i`` in ``{1..5}``.

    ``gamma`` is chosen so that ``(gamma sum d)^{1/2} / ||b_true|| = level``.
    """
    b_true = np.asarray(b_true, dtype=float)
    if level <= 0:
        raise ValueError("noise level must be positive")
    nrm = np.linalg.norm(b_true)
    if nrm == 0:
        raise ValueError("noise level is undefined for zero data")
    rng = np.random.Generator(np.random.PCG64(seed))
    d = rng.integers(1, 6, size=b_true.size).astype(float)
    gamma = level ** 2 * nrm ** 2 / d.sum()
    var = gamma * d
    eps = np.sqrt(var) * rng.standard_normal(b_true.size)
    return b_true + eps, DiagonalSpd(1.0 / var), DiagonalSpd(var)


_GENERATORS = {"gravity": gravity_problem, "shaw": shaw_problem}
_NOISE = {"white": add_noise_white, "diagonal": add_noise_diagonal}


def make_problem(name, n, kernel, noise="white", level=5e-3, seed=0,
                 blur_width=2.0, jitter=None):
    """Build a complete :class:`InverseProblem`.

    For ``blur2d`` the argument ``n`` is the image side length ``n1``.
    """
    if name == "blur2d":
        A, x_true, b_true, points = blur2d_problem(n, blur_width)
    elif name in _GENERATORS:
        A, x_true, b_true, points = _GENERATORS[name](n)
    else:
        raise ValueError(f"unknown problem {name!r}")
    if noise not in _NOISE:
        raise ValueError(f"unknown noise model {noise!r}")
    b, M_inv, M = _NOISE[noise](b_true, level, seed)
    N = build_covariance(points, kernel, jitter=jitter)
    meta = {"name": name, "n": int(n), "kernel": kernel.to_dict(), "noise": noise,
            "level": float(level), "seed": int(seed), "jitter": jitter}
    if name == "blur2d":
        meta["blur_width"] = float(blur_width)
    return InverseProblem(A, b, b_true, x_true, M_inv, M, N, points, meta)


def save_problem(problem, directory):
    """Write a problem to ``directory``.

    Layout: ``A.bin`` (dense operators only), ``b.bin``, ``b_true.bin``,
    ``x_true.bin``, ``points.bin``, ``M.bin`` (diagonal of ``M`` for
    diagonal noise, else the full matrix) and ``meta.json``.  The prior
    covariance is rebuilt from the kernel recorded in the metadata.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if problem.A.is_dense:
        write_matrix(d / "A.bin", problem.A.matrix)
    for name in ("b", "b_true", "x_true"):
        write_matrix(d / f"{name}.bin", getattr(problem, name))
    write_matrix(d / "points.bin", np.asarray(problem.points).reshape(problem.A.n, -1))
    M = problem.M
    write_matrix(d / "M.bin", M.diag if isinstance(M, DiagonalSpd) else M.to_dense())
    meta = dict(problem.meta, m=problem.A.m, dense=problem.A.is_dense,
                M_diagonal=isinstance(M, DiagonalSpd))
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_problem(directory):
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    if meta["dense"]:
        A = ForwardOperator.from_dense(read_matrix(d / "A.bin"))
    elif meta["name"] == "blur2d":
        A = blur2d_problem(meta["n"], meta["blur_width"])[0]
    else:
        raise ValueError(f"cannot rebuild operator for {meta['name']!r}")
    b, b_true, x_true = (read_matrix(d / f"{k}.bin", vector=True)
                         for k in ("b", "b_true", "x_true"))
    points = read_matrix(d / "points.bin")
    if points.shape[1] == 1:
        points = points[:, 0]
    if meta["M_diagonal"]:
        var = read_matrix(d / "M.bin", vector=True)
        M, M_inv = DiagonalSpd(var), DiagonalSpd(1.0 / var)
    else:
        Md = read_matrix(d / "M.bin")
        M, M_inv = DenseSpd(Md), DenseSpd(np.linalg.inv(Md))
    N = build_covariance(points, KernelSpec.from_dict(meta["kernel"]), jitter=meta.get("jitter"))
    meta = {k: v for k, v in meta.items() if k not in ("m", "dense", "M_diagonal")}
    return InverseProblem(A, b, b_true, x_true, M_inv, M, N, points, meta)
