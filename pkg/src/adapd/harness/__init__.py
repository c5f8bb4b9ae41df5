from .config import (
    AlgorithmSpec,
    BudgetSpec,
    ExperimentConfig,
    InitSpec,
    MetricsSpec,
    ProblemSpec,
    TopologySpec,
    dumps_toml,
    load_config,
    parse_overrides,
)
from .run import (
    Z95,
    RunSummary,
    TrialResult,
    build_trial,
    export_figures,
    grid_search,
    run_experiment,
    run_trial,
    validate_topology,
)

__all__ = [
    "ExperimentConfig",
    "ProblemSpec",
    "TopologySpec",
    "AlgorithmSpec",
    "BudgetSpec",
    "InitSpec",
    "MetricsSpec",
    "load_config",
    "parse_overrides",
    "dumps_toml",
    "run_experiment",
    "run_trial",
    "grid_search",
    "validate_topology",
    "export_figures",
    "build_trial",
    "RunSummary",
    "TrialResult",
    "Z95",
]
