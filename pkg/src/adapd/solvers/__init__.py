from .core import DGD, Adapd, AdapdOG, ProxGPDA, TheoryWarning, make_solver
from .inner import inner_solve
from .mixing_ops import (
    ChebyshevOperator,
    MixingOperator,
    PlainOperator,
    PowerOperator,
    chebyshev_contraction,
    chebyshev_mix,
    default_mc_degree,
    make_operator,
)
from .state import (
    AgentState,
    BaselineState,
    InnerConfig,
    InnerResult,
    SolverConfig,
    eps_schedule,
    load_state_arrays,
    save_state,
)

__all__ = [
    "Adapd",
    "AdapdOG",
    "DGD",
    "ProxGPDA",
    "TheoryWarning",
    "make_solver",
    "inner_solve",
    "chebyshev_mix",
    "chebyshev_contraction",
    "default_mc_degree",
    "make_operator",
    "MixingOperator",
    "PlainOperator",
    "PowerOperator",
    "ChebyshevOperator",
    "AgentState",
    "BaselineState",
    "InnerConfig",
    "InnerResult",
    "SolverConfig",
    "eps_schedule",
    "save_state",
    "load_state_arrays",
]
