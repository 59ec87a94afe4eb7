"""
服务模块
"""

from .chain_core import (
    StochasticChain,
    n_step,
    total_variation,
    validate_chain,
)
from .ergodicity import (
    InvariantMethod,
    convergence_envelope,
    invariant_measure,
    md_coefficient,
)
from .mc_engine import SeedSpec, sample_batch, sample_path
from .poisson import BoundaryProblem, SolveMethod
from .replica_pool import ExecutionMode, ReplicaPool, get_replica_pool

__all__ = [
    "StochasticChain",
    "n_step",
    "total_variation",
    "validate_chain",
    "InvariantMethod",
    "convergence_envelope",
    "invariant_measure",
    "md_coefficient",
    "SeedSpec",
    "sample_batch",
    "sample_path",
    "BoundaryProblem",
    "SolveMethod",
    "ExecutionMode",
    "ReplicaPool",
    "get_replica_pool",
]
