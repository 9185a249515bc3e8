"""Matrix-free forward operators and SPD covariance actions.

The iterative path only ever needs the products ``A @ x``, ``A.T @ y``,
``M^{-1} @ y`` and ``N @ x``.  :class:`ForwardOperator` wraps the first two
and :class:`SpdAction` (with its dense, diagonal and kernel-backed variants)
wraps the covariance products.

Dense matrices can be stored on disk in a small row-major format, see
:func:`write_matrix` / :func:`read_matrix`.
"""

import struct
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "ForwardOperator",
    "SpdAction",
    "DenseSpd",
    "DiagonalSpd",
    "KernelSpd",
    "as_forward_operator",
    "as_spd",
    "weighted_inner",
    "weighted_norm",
    "adjoint_mismatch",
    "symmetry_mismatch",
    "write_matrix",
    "read_matrix",
]


class ForwardOperator:
    """Linear map ``A: R^n -> R^m`` given by its action and adjoint action.

    Parameters
    ----------
    m, n : int
        Row and column counts.
    apply : callable
        ``x (n,) -> A x (m,)``.
    apply_adjoint : callable
        ``y (m,) -> A^T y (n,)``.
    matrix : ndarray, optional
        The explicit matrix when the operator is dense-backed.  Only the
        dense oracle looks at it.
    """

    def __init__(self, m, n, apply, apply_adjoint, matrix=None):
        self.m = int(m)
        self.n = int(n)
        self._apply = apply
        self._apply_adjoint = apply_adjoint
        self.matrix = matrix

    @classmethod
    def from_dense(cls, A):
        A = np.array(A, dtype=float, order="C")
        if A.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
        A.setflags(write=False)
        return cls(A.shape[0], A.shape[1], A.__matmul__, A.T.__matmul__, matrix=A)

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def is_dense(self):
        return self.matrix is not None

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"operator expects {self.n} rows, got {x.shape[0]}")
        return self._apply(x)

    def apply_adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.m:
            raise ValueError(f"adjoint expects {self.m} rows, got {y.shape[0]}")
        return self._apply_adjoint(y)

    def to_dense(self):
        if self.matrix is not None:
            return np.array(self.matrix)
        return np.column_stack([self.apply(e) for e in np.eye(self.n)])

    def aslinearoperator(self):
        return LinearOperator(
            (self.m, self.n), matvec=self.apply, rmatvec=self.apply_adjoint, dtype=float
        )

    def __repr__(self):
        kind = "dense" if self.is_dense else "matrix-free"
        return f"ForwardOperator(m={self.m}, n={self.n}, {kind})"


def as_forward_operator(A):
    """Coerce an array, scipy ``LinearOperator`` or :class:`ForwardOperator`."""
    if isinstance(A, ForwardOperator):
        return A
    if isinstance(A, LinearOperator):
        m, n = A.shape
        return ForwardOperator(m, n, A.matvec, A.rmatvec)
    return ForwardOperator.from_dense(A)


class SpdAction:
    """Product with a symmetric positive definite matrix ``W``.

    Subclasses implement :meth:`apply` for vectors and for ``(dim, k)``
    blocks.  ``kind`` is one of ``"dense"``, ``"diagonal"`` or ``"kernel"``.
    """

    kind = None

    def __init__(self, dim):
        self.dim = int(dim)

    def apply(self, x):
        raise NotImplementedError

    def __matmul__(self, x):
        return self.apply(x)

    def to_dense(self):
        raise NotImplementedError

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: action has order {self.dim}, "
                             f"input has {x.shape[0]} rows")
        return x

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class DenseSpd(SpdAction):
    kind = "dense"

    def __init__(self, matrix):
        W = np.array(matrix, dtype=float, order="C")
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {W.shape}")
        super().__init__(W.shape[0])
        W.setflags(write=False)
        self.matrix = W

    def apply(self, x):
        return self.matrix @ self._check(x)

    def to_dense(self):
        return np.array(self.matrix)


class DiagonalSpd(SpdAction):
    kind = "diagonal"

    def __init__(self, diag):
        d = np.array(diag, dtype=float).ravel()
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("diagonal entries must be positive and finite")
        super().__init__(d.size)
        d.setflags(write=False)
        self.diag = d

    def apply(self, x):
        x = self._check(x)
        return self.diag * x if x.ndim == 1 else self.diag[:, None] * x

    def inverse(self):
        return DiagonalSpd(1.0 / self.diag)

    def to_dense(self):
        return np.diag(self.diag)


class KernelSpd(DenseSpd):
    """Dense covariance built from a stationary kernel on a point set."""

    kind = "kernel"

    def __init__(self, matrix, spec=None, points=None):
        super().__init__(matrix)
        self.spec = spec
        self.points = points


def as_spd(W, dim):
    """Coerce ``None`` (identity), a scalar, a 1-D diagonal or a 2-D matrix."""
    if isinstance(W, SpdAction):
        if W.dim != dim:
            raise ValueError(f"SPD action has order {W.dim}, expected {dim}")
        return W
    if W is None:
        return DiagonalSpd(np.ones(dim))
    W = np.asarray(W, dtype=float)
    if W.ndim == 0:
        return DiagonalSpd(np.full(dim, float(W)))
    if W.ndim == 1:
        out = DiagonalSpd(W)
    else:
        out = DenseSpd(W)
    if out.dim != dim:
        raise ValueError(f"SPD action has order {out.dim}, expected {dim}")
    return out


def weighted_inner(u, v, w_apply):
    """Return ``u^T W v`` for the SPD action ``w_apply``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape[0] != w_apply.dim:
        raise ValueError(f"dimension mismatch: {u.shape}, {v.shape}, order {w_apply.dim}")
    return float(u @ w_apply.apply(v))


def weighted_norm(u, w_apply):
    """Return ``(u^T W u)^{1/2}``.

    Raises
    ------
    ValueError
        If the quadratic form is negative beyond rounding, which means ``W``
        is not positive definite.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] != w_apply.dim:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs order {w_apply.dim}")
    Wu = w_apply.apply(u)
    q = float(u @ Wu)
    if q < -1e-14 * max(1.0, float(np.linalg.norm(u) * np.linalg.norm(Wu))):
        raise ValueError(f"negative quadratic form {q:.3e}: weight is not SPD")
    return float(np.sqrt(max(q, 0.0)))


def adjoint_mismatch(A, rng=None, probes=1):
    """Largest ``|<Ax, y> - <x, A^T y>| / (||Ax|| ||y||)`` over random probes."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(A.n)
        y = rng.standard_normal(A.m)
        Ax = A.apply(x)
        gap = abs(Ax @ y - x @ A.apply_adjoint(y))
        worst = max(worst, gap / (np.linalg.norm(Ax) * np.linalg.norm(y)))
    return worst


def symmetry_mismatch(W, rng=None, probes=1):
    """Largest ``|<Wx, y> - <x, Wy>| / (||Wx|| ||y||)`` over random probes."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(W.dim)
        y = rng.standard_normal(W.dim)
        Wx = W.apply(x)
        gap = abs(Wx @ y - x @ W.apply(y))
        worst = max(worst, gap / (np.linalg.norm(Wx) * np.linalg.norm(y)))
    return worst


# Binary layout: 8-byte magic, little-endian int64 m, int64 n, then m*n
# little-endian float64 values in row-major order.  The text layout has a
# header line "m n" followed by m whitespace-separated rows.
_MAGIC = b"GSPRMAT1"


def write_matrix(path, A, fmt=None):
    """Write a dense matrix (or a vector, stored as ``m x 1``)."""
    path = Path(path)
    A = np.asarray(A, dtype="<f8")
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError("only vectors and matrices can be written")
    fmt = fmt or ("text" if path.suffix == ".txt" else "binary")
    m, n = A.shape
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<qq", m, n))
            fh.write(np.ascontiguousarray(A).tobytes())
    elif fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{m} {n}\n")
            for row in A:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def read_matrix(path, vector=False):
    """Read a matrix written by :func:`write_matrix`; format is sniffed."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
        if head == _MAGIC:
            m, n = struct.unpack("<qq", fh.read(16))
            data = np.frombuffer(fh.read(), dtype="<f8")
            if data.size != m * n:
                raise ValueError(f"{path}: expected {m * n} values, found {data.size}")
            A = data.reshape(m, n).astype(float)
        else:
            fh.seek(0)
            lines = fh.read().decode("utf-8").split("\n", 1)
            m, n = (int(t) for t in lines[0].split())
            values = np.array(lines[1].split(), dtype=float) if len(lines) > 1 else np.empty(0)
            if values.size != m * n:
                raise ValueError(f"{path}: expected {m * n} values, found {values.size}")
            A = values.reshape(m, n)
    if vector:
        if A.shape[1] != 1:
            raise ValueError(f"{path}: expected a column vector, got shape {A.shape}")
        return A[:, 0]
    return A
