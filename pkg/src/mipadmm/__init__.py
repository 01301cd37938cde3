"""Majorized ADMM with indefinite proximal terms, sGS multi-block sweeps and
regularized logistic regression models."""

from .ipadmm import (
    CompositeProblem,
    ConfigurationError,
    IterateState,
    MajorizedIPADMM,
    RegimeError,
    SolveResult,
    SolverConfig,
    SubproblemError,
    VARIANTS,
    kkt_residual,
    solve,
)
from .sgs import BlockPartition, SGSIPADMM, build_equivalent_two_block, solve_sgs
from .problems import (
    build_constrained_logistic,
    build_fused_lasso_logistic,
    build_lasso_logistic,
    build_sparse_group_lasso_dual,
    lambda_from_gamma,
)

__all__ = [
    "BlockPartition",
    "CompositeProblem",
    "ConfigurationError",
    "IterateState",
    "MajorizedIPADMM",
    "RegimeError",
    "SGSIPADMM",
    "SolveResult",
    "SolverConfig",
    "SubproblemError",
    "VARIANTS",
    "build_constrained_logistic",
    "build_equivalent_two_block",
    "build_fused_lasso_logistic",
    "build_lasso_logistic",
    "build_sparse_group_lasso_dual",
    "kkt_residual",
    "lambda_from_gamma",
    "solve",
    "solve_sgs",
]
