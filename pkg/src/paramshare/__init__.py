"""Learning which parameters of a linear model to tie.

A sharing scheme ties ``K`` parameters to free values through
``theta = A psi`` with ``A`` binary and row-stochastic. The scheme is
chosen to minimize validation loss after fitting ``psi`` on a training
split, either by enumerating all partitions or by a relaxed gradient
search. The ties found this way describe the permutations the model is
equivariant to.
"""

from .discovery import (
    DiscoveryError,
    DiscoveryResult,
    LinearSharedTask,
    RelaxHyperparams,
    discover_brute_force,
    discover_fixed,
    discover_relaxed,
    upper_gradient,
    upper_objective,
)
from .estimators import SharedLinearRegressor, SharedMeanEstimator
from .partition import (
    CapacityError,
    Partition,
    PartitionFormatError,
    partition_distance,
    parse_partition,
    scheme_from_partition,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "DiscoveryError", "DiscoveryResult", "LinearSharedTask", "Partition",
    "PartitionFormatError", "RelaxHyperparams", "SharedLinearRegressor",
    "SharedMeanEstimator", "discover_brute_force", "discover_fixed", "discover_relaxed",
    "parse_partition", "partition_distance", "scheme_from_partition", "upper_gradient",
    "upper_objective",
]
