"""Experiment configuration: declarative TOML files with typed sections.

A config names one problem, one topology, one algorithm, exactly one budget
kind, and a trial count.  ``load_config`` parses and validates; every run
writes the fully-resolved config next to its outputs so a run directory is
self-describing.  Dotted ``--override`` pairs patch single keys.
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..solvers import InnerConfig, SolverConfig

__all__ = [
    "ProblemSpec",
    "TopologySpec",
    "AlgorithmSpec",
    "BudgetSpec",
    "InitSpec",
    "MetricsSpec",
    "ExperimentConfig",
    "load_config",
    "parse_overrides",
    "dumps_toml",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "ADAPD_OUTPUT_ROOT"

_PROBLEM_KINDS = ("quadratic", "logistic_synthetic", "logistic_libsvm", "localization")
_TOPOLOGY_KINDS = ("ring", "erdos_renyi", "geometric", "averaging")
_ALGORITHM_KINDS = ("adapd", "adapd_og", "dgd", "prox_gpda")
_BUDGET_KINDS = ("communications", "iterations", "gradients")
_GRID_KEYS = ("eta", "alpha0", "beta", "eps_hat")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    dim: int = 2
    target_scale: float = 1.0  # quadratic
    m: int = 1000  # synthetic logistic sample count
    alpha: float = 0.01  # logistic regularizer weight
    margin_noise: float = 0.5  # synthetic logistic label noise
    style: str = "gaussian"  # synthetic feature recipe (gaussian | sparse_scaled)
    path: str = ""  # libsvm file
    n_features: int = 0  # 0 = infer from file
    n_targets: int = 3  # localization
    sigma2: float = 0.01  # localization noise variance

    def validate(self) -> None:
        if self.kind not in _PROBLEM_KINDS:
            raise ConfigError(f"problem.kind must be one of {_PROBLEM_KINDS}, got {self.kind!r}")
        if self.kind == "logistic_libsvm" and not self.path:
            raise ConfigError("problem.path is required for logistic_libsvm")


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    n: int = 10
    self_weight: float = 0.5  # ring
    p: float = 0.3  # erdos_renyi
    radius: float = 0.3  # geometric
    weights: str = "laplacian"  # laplacian | metropolis (random graphs)
    tau: float = 0.0  # 0 = Gershgorin default
    eps: float = 1.0  # metropolis offset

    def validate(self) -> None:
        if self.kind not in _TOPOLOGY_KINDS:
            raise ConfigError(f"topology.kind must be one of {_TOPOLOGY_KINDS}, got {self.kind!r}")
        if self.weights not in ("laplacian", "metropolis"):
            raise ConfigError(f"topology.weights must be laplacian or metropolis, got {self.weights!r}")
        if self.n < 1:
            raise ConfigError(f"topology.n must be positive, got {self.n}")


@dataclass(frozen=True)
class AlgorithmSpec:
    kind: str
    eta: float = 0.1
    dual_step_scale: float = 1.0
    cheby_degree: int = 1  # 0 = auto (ceil(2/sqrt(1-rho)))
    mc_mode: str = "chebyshev"
    alpha0: float = 0.1
    dgd_decay: float = 0.5
    beta: float = 1.0
    batch_size: int = 0  # 0 = deterministic gradients
    inner_method: str = "fista"
    eps_hat: float = 1e-3
    decay: float = 1.5
    max_inner: int = 500
    best_effort: bool = False
    l_hat: float = 0.0  # 0 = oracle hint; < 0 = sampled estimate

    def validate(self) -> None:
        if self.kind not in _ALGORITHM_KINDS:
            raise ConfigError(f"algorithm.kind must be one of {_ALGORITHM_KINDS}, got {self.kind!r}")
        if self.eta <= 0:
            raise ConfigError(f"algorithm.eta must be positive, got {self.eta}")
        if self.cheby_degree < 0:
            raise ConfigError("algorithm.cheby_degree must be >= 1, or 0 for auto")

    def solver_config(self, seed: int, l_hat: float | None) -> SolverConfig:
        inner = InnerConfig(
            method=self.inner_method,
            eps_hat=self.eps_hat,
            decay=self.decay,
            max_iterations=self.max_inner,
            best_effort=self.best_effort,
            l_hat=l_hat,
            batch_size=self.batch_size or None,
        )
        return SolverConfig(
            eta=self.eta,
            inner=inner,
            cheby_degree=max(self.cheby_degree, 1),
            mc_mode=self.mc_mode,
            dual_step_scale=self.dual_step_scale,
            seed=seed,
            batch_size=self.batch_size or None,
            alpha0=self.alpha0,
            dgd_decay=self.dgd_decay,
            beta=self.beta,
        )


@dataclass(frozen=True)
class BudgetSpec:
    kind: str
    limit: int

    def validate(self) -> None:
        if self.kind not in _BUDGET_KINDS:
            raise ConfigError(f"budget kind must be one of {_BUDGET_KINDS}, got {self.kind!r}")
        if self.limit < 1:
            raise ConfigError(f"budget limit must be positive, got {self.limit}")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "zeros"  # zeros | gaussian
    scale: float = 1.0

    def validate(self) -> None:
        if self.kind not in ("zeros", "gaussian"):
            raise ConfigError(f"init.kind must be zeros or gaussian, got {self.kind!r}")


@dataclass(frozen=True)
class MetricsSpec:
    lyapunov: str = ""  # "" | adapd | og
    dual_residual: str = ""  # "" | adapd | og
    record_timing: bool = False
    jsonl: bool = False

    def validate(self) -> None:
        for name, v in (("lyapunov", self.lyapunov), ("dual_residual", self.dual_residual)):
            if v not in ("", "adapd", "og"):
                raise ConfigError(f"metrics.{name} must be '', 'adapd' or 'og', got {v!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    problem: ProblemSpec
    topology: TopologySpec
    algorithm: AlgorithmSpec
    budget: BudgetSpec
    trials: int = 1
    seed_base: int = 0
    output_dir: str = "runs"
    init: InitSpec = field(default_factory=InitSpec)
    metrics: MetricsSpec = field(default_factory=MetricsSpec)
    grid: dict[str, list[float]] = field(default_factory=dict)
    grid_trials: int = 1

    def validate(self) -> None:
        if not self.name:
            raise ConfigError("config needs a non-empty name")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.grid_trials < 1:
            raise ConfigError(f"grid_trials must be >= 1, got {self.grid_trials}")
        for key, values in self.grid.items():
            if key not in _GRID_KEYS:
                raise ConfigError(f"grid key {key!r} not in {_GRID_KEYS}")
            if not values:
                raise ConfigError(f"grid list for {key!r} is empty")
        self.problem.validate()
        self.topology.validate()
        self.algorithm.validate()
        self.budget.validate()
        self.init.validate()
        self.metrics.validate()
        if self.problem.kind == "localization" and self.topology.kind != "geometric":
            raise ConfigError("localization instances define their own geometric topology")

    def output_root(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        return Path(root) if root else Path(self.output_dir)

    def run_dir(self) -> Path:
        return self.output_root() / self.name

    def with_algorithm(self, **kwargs) -> "ExperimentConfig":
        return replace(self, algorithm=replace(self.algorithm, **kwargs))

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "trials": self.trials,
            "seed_base": self.seed_base,
            "output_dir": self.output_dir,
            "grid_trials": self.grid_trials,
            "problem": asdict(self.problem),
            "topology": asdict(self.topology),
            "algorithm": asdict(self.algorithm),
            "budget": {self.budget.kind: self.budget.limit},
            "init": asdict(self.init),
            "metrics": asdict(self.metrics),
        }
        if self.grid:
            doc["grid"] = dict(self.grid)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)

        def section(name: str, spec_cls, required: bool = True):
            raw = doc.pop(name, None)
            if raw is None:
                if required:
                    raise ConfigError(f"config is missing the [{name}] section")
                return spec_cls()
            if not isinstance(raw, dict):
                raise ConfigError(f"[{name}] must be a table")
            fields = {f for f in spec_cls.__dataclass_fields__}
            unknown = set(raw) - fields
            if unknown:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
            try:
                return spec_cls(**raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [{name}] section: {exc}") from exc

        budget_raw = doc.pop("budget", None)
        if not isinstance(budget_raw, dict):
            raise ConfigError("config needs a [budget] table")
        kinds = [k for k in _BUDGET_KINDS if k in budget_raw]
        if len(kinds) != 1:
            raise ConfigError(f"budget must set exactly one of {_BUDGET_KINDS}, got {kinds}")
        budget = BudgetSpec(kind=kinds[0], limit=int(budget_raw[kinds[0]]))

        grid_raw = doc.pop("grid", {})
        if not isinstance(grid_raw, dict):
            raise ConfigError("[grid] must be a table of lists")
        grid = {k: [float(v) for v in vals] for k, vals in grid_raw.items()}

        cfg = cls(
            name=str(doc.pop("name", "")),
            trials=int(doc.pop("trials", 1)),
            seed_base=int(doc.pop("seed_base", 0)),
            output_dir=str(doc.pop("output_dir", "runs")),
            grid_trials=int(doc.pop("grid_trials", 1)),
            problem=section("problem", ProblemSpec),
            topology=section("topology", TopologySpec),
            algorithm=section("algorithm", AlgorithmSpec),
            budget=budget,
            init=section("init", InitSpec, required=False),
            metrics=section("metrics", MetricsSpec, required=False),
            grid=grid,
        )
        if doc:
            raise ConfigError(f"unknown top-level config keys: {sorted(doc)}")
        cfg.validate()
        return cfg


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    if overrides:
        doc = apply_overrides(doc, parse_overrides(overrides))
    return ExperimentConfig.from_dict(doc)


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} must look like key.path=value")
        key, raw = pair.split("=", 1)
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw  # bare strings pass through
        out[key.strip()] = value
    return out


def apply_overrides(doc: dict, patches: dict[str, Any]) -> dict:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    for dotted, value in patches.items():
        parts = dotted.split(".")
        node = doc
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return doc


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def dumps_toml(doc: dict) -> str:
    """Serialize a nested dict of plain values back to TOML."""
    lines: list[str] = []
    tables: list[tuple[str, dict]] = []
    for key, value in doc.items():
        if isinstance(value, dict):
            tables.append((key, value))
        else:
            lines.append(f"{key} = {_toml_value(value)}")

    def emit(prefix: str, table: dict) -> None:
        lines.append("")
        lines.append(f"[{prefix}]")
        subs: list[tuple[str, dict]] = []
        for key, value in table.items():
            if isinstance(value, dict):
                subs.append((key, value))
            else:
                lines.append(f"{key} = {_toml_value(value)}")
        for key, sub in subs:
            emit(f"{prefix}.{key}", sub)

    for key, table in tables:
        emit(key, table)
    return "\n".join(lines) + "\n"
