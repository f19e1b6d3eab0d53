"""Doubly sparse covariance estimation on chordal graphs.

A symmetric matrix is doubly sparse when both it and its inverse vanish off
a chordal graph.  Such matrices are determined by their clique blocks, which
makes inversion and log-determinants local computations; the estimator
fits one to a sample covariance by constrained maximum likelihood.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .errors import (
    ConsistencyError,
    DscovError,
    InputError,
    InsufficientDataError,
    NotChordalError,
    SingularBlockError,
)
from .estimator import (
    EstimateResult,
    EstimatorOptions,
    estimate,
    objective_value,
    sample_covariance,
    simulate_gaussian,
)
from .graph import (
    ChordalGraph,
    CliqueTree,
    build_clique_tree,
    check_chordal,
    is_chordal,
    maximal_cliques,
    triangulate,
)
from .local import (
    PartialMatrix,
    constraint_residual,
    is_doubly_sparse,
    local_inverse,
    local_logdet,
    markov_complete,
)

__all__ = [
    "BACKEND",
    "available_backends",
    "ChordalGraph",
    "CliqueTree",
    "ConsistencyError",
    "DscovError",
    "EstimateResult",
    "EstimatorOptions",
    "InputError",
    "InsufficientDataError",
    "NotChordalError",
    "PartialMatrix",
    "SingularBlockError",
    "build_clique_tree",
    "check_chordal",
    "constraint_residual",
    "estimate",
    "is_chordal",
    "is_doubly_sparse",
    "local_inverse",
    "local_logdet",
    "markov_complete",
    "maximal_cliques",
    "objective_value",
    "sample_covariance",
    "simulate_gaussian",
    "triangulate",
]
