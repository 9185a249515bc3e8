"""Subspace projection regularization for Bayesian linear inverse problems."""

from .estimator import SPRRegressor
from .gengkb import GenGkbState, gengkb, gengkb_init, gengkb_step
from .kernels import KernelSpec, build_covariance, kernel_eval
from .operators import (
    DenseSpd,
    DiagonalSpd,
    ForwardOperator,
    KernelSpd,
    SpdAction,
    read_matrix,
    weighted_inner,
    weighted_norm,
    write_matrix,
)
from .problems import InverseProblem, load_problem, make_problem, save_problem
from .spr import SolveResult, solve, spr_solve
from .stopping import StopConfig

__version__ = "0.1.0"

__all__ = [
    "SPRRegressor",
    "GenGkbState",
    "gengkb",
    "gengkb_init",
    "gengkb_step",
    "KernelSpec",
    "build_covariance",
    "kernel_eval",
    "DenseSpd",
    "DiagonalSpd",
    "ForwardOperator",
    "KernelSpd",
    "SpdAction",
    "read_matrix",
    "weighted_inner",
    "weighted_norm",
    "write_matrix",
    "InverseProblem",
    "load_problem",
    "make_problem",
    "save_problem",
    "SolveResult",
    "solve",
    "spr_solve",
    "StopConfig",
]
