"""Sparse Gaussian Bayesian network structure learning.

Estimates directed acyclic graph models from multivariate Gaussian data by
minimizing a penalized negative log-likelihood with cyclic block coordinate
descent, under a minimax concave (MCP) or l1 penalty, along a decreasing
grid of regularization levels.  Includes a structural-equation data
simulator, structure-recovery metrics and a command-line interface.
"""

__version__ = "0.1.0"

from .graph import (
    CycleError,
    DirectedGraph,
    Permutation,
    decompose_for_permutation,
    enumerate_equivalence_class,
    induces_cycle,
    permuted_cholesky_identity_check,
    topological_sort,
)
from .metrics import StructureMetrics, compare, refit_ols, test_loglik
from .model import (
    Dataset,
    DegenerateDataError,
    PrecisionMatrix,
    ReparamState,
    WeightedDag,
    bic_score,
    loglik_dag,
    loglik_reparam,
    loglik_theta,
    theta_from_dag,
    theta_from_reparam,
    to_dag,
    to_reparam,
)
from .penalty import L1, MCP, PenaltyConfig, penalty_value, tau, threshold
from .simulate import SimConfig, random_dag, sample_sem
from .solver import (
    PathPoint,
    SolutionPath,
    SolverConfig,
    block_update,
    fit_path,
    fit_single_lambda,
    lambda_grid,
    null_state,
    phi_tilde,
    sweep,
    update_phi,
    update_rho,
)

__all__ = [
    "CycleError",
    "Dataset",
    "DegenerateDataError",
    "DirectedGraph",
    "L1",
    "MCP",
    "PathPoint",
    "PenaltyConfig",
    "Permutation",
    "PrecisionMatrix",
    "ReparamState",
    "SimConfig",
    "SolutionPath",
    "SolverConfig",
    "StructureMetrics",
    "WeightedDag",
    "bic_score",
    "block_update",
    "compare",
    "decompose_for_permutation",
    "enumerate_equivalence_class",
    "fit_path",
    "fit_single_lambda",
    "induces_cycle",
    "lambda_grid",
    "loglik_dag",
    "loglik_reparam",
    "loglik_theta",
    "null_state",
    "penalty_value",
    "permuted_cholesky_identity_check",
    "phi_tilde",
    "random_dag",
    "refit_ols",
    "sample_sem",
    "sweep",
    "tau",
    "test_loglik",
    "theta_from_dag",
    "theta_from_reparam",
    "threshold",
    "to_dag",
    "to_reparam",
    "topological_sort",
    "update_phi",
    "update_rho",
]
