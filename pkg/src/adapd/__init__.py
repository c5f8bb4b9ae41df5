"""Decentralized primal-dual consensus optimization.

Library and experiment harness for non-convex smooth consensus problems
over undirected agent networks: the inexact primal-dual solver family
(with one-gradient and multiple-communication variants), DGD and
Prox-GPDA baselines, benchmark objectives, gossip mixing matrices with
spectral validation, and theory-derived runtime diagnostics.
"""

from . import diagnostics, problems, solvers, topology
from .errors import (
    AdapdError,
    ConfigError,
    DataError,
    DegenerateSpectrumError,
    DivergenceError,
    GridExhaustedError,
    InexactnessError,
    InvalidParameterError,
    ParseError,
    PartitionError,
    TopologyError,
    TopologyGenerationError,
)

__version__ = "0.1.0"

__all__ = [
    "topology",
    "problems",
    "solvers",
    "diagnostics",
    "AdapdError",
    "TopologyError",
    "TopologyGenerationError",
    "InvalidParameterError",
    "DegenerateSpectrumError",
    "ParseError",
    "PartitionError",
    "InexactnessError",
    "DivergenceError",
    "ConfigError",
    "DataError",
    "GridExhaustedError",
    "__version__",
]
