"""Iterate state and solver configuration shared by the solver family."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatchError

__all__ = [
    "AgentState",
    "BaselineState",
    "InnerConfig",
    "SolverConfig",
    "InnerResult",
    "eps_schedule",
    "save_state",
    "load_state_arrays",
]


@dataclass
class AgentState:
    """Iterate blocks of the primal-dual solvers.

    ``X`` holds the per-agent decision rows, ``X0`` the auxiliary consensus
    block, ``Y`` the disagreement dual, and ``Ztilde`` the communicable
    consensus dual.  Previous-iterate buffers back the recursion that avoids
    one matrix application per round and feed the diagnostics.  Counters:
    ``comm_count`` accumulates neighbour-exchange rounds; ``grad_counts[i]``
    accumulates gradient evaluations of agent i.
    """

    X: np.ndarray
    X0: np.ndarray
    Y: np.ndarray
    Ztilde: np.ndarray
    X_prev: np.ndarray
    X0_prev: np.ndarray
    Ztilde_prev: np.ndarray
    k: int = 0
    comm_count: int = 0
    grad_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def grad_count(self) -> int:
        """Synchronous-round gradient cost: the slowest agent's tally."""
        return int(self.grad_counts.max()) if self.grad_counts.size else 0

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "X": self.X,
            "X0": self.X0,
            "Y": self.Y,
            "Ztilde": self.Ztilde,
            "X_prev": self.X_prev,
            "X0_prev": self.X0_prev,
            "Ztilde_prev": self.Ztilde_prev,
            "grad_counts": self.grad_counts,
        }


@dataclass
class BaselineState:
    """Lean iterate state for the single-block baselines (DGD, Prox-GPDA)."""

    X: np.ndarray
    X_prev: np.ndarray
    k: int = 0
    comm_count: int = 0
    grad_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def grad_count(self) -> int:
        return int(self.grad_counts.max()) if self.grad_counts.size else 0

    def arrays(self) -> dict[str, np.ndarray]:
        return {"X": self.X, "X_prev": self.X_prev, "grad_counts": self.grad_counts}


@dataclass(frozen=True)
class InnerConfig:
    """Local subproblem solver settings.

    ``eps_hat`` and ``decay`` set the residual schedule
    ``eps_k = eps_hat / (k+1)**decay``; ``decay > 1`` makes the schedule
    summable.  ``l_hat`` overrides the oracle smoothness hint (mandatory for
    problems that do not carry one).  With ``best_effort`` a missed
    tolerance is recorded instead of raised.
    """

    method: str = "fista"  # fista | gradient_descent | exact | sgd
    eps_hat: float = 1e-3
    decay: float = 1.5
    max_iterations: int = 500
    best_effort: bool = False
    l_hat: float | None = None
    batch_size: int | None = None  # sgd inner steps only

    def __post_init__(self) -> None:
        if self.method not in ("fista", "gradient_descent", "exact", "sgd"):
            raise ValueError(f"unknown inner method {self.method!r}")
        if self.eps_hat <= 0 or self.decay <= 0 or self.max_iterations < 1:
            raise ValueError("inner solver schedule parameters must be positive")


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters for one solver run.

    ``eta`` is the primal-dual penalty/step parameter.  ``cheby_degree > 1``
    turns on the multiple-communications variant, applying a degree-R
    polynomial of the mixing matrix (``mc_mode='chebyshev'``) or its R-th
    power per round.  ``dual_step_scale`` rescales both dual steps away from
    their default 1/eta (theory covers scale 1 only).
    """

    eta: float = 0.1
    inner: InnerConfig = field(default_factory=InnerConfig)
    cheby_degree: int = 1
    mc_mode: str = "chebyshev"
    dual_step_scale: float = 1.0
    seed: int = 0
    batch_size: int | None = None  # stochastic forward steps (one-gradient variant)
    # baseline hyperparameters
    alpha0: float = 0.1
    dgd_decay: float = 0.5
    beta: float = 1.0
    divergence_norm: float = 1e12

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.cheby_degree < 1:
            raise ValueError(f"cheby_degree must be >= 1, got {self.cheby_degree}")
        if self.mc_mode not in ("chebyshev", "power"):
            raise ValueError(f"unknown mc_mode {self.mc_mode!r}")
        if self.dual_step_scale <= 0:
            raise ValueError("dual_step_scale must be positive")

    def with_(self, **kwargs) -> "SolverConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class InnerResult:
    """Outcome of one local subproblem solve."""

    x: np.ndarray
    residual_sq: float
    iterations: int
    grad_evals: int
    converged: bool


def eps_schedule(inner: InnerConfig, j: int) -> float:
    """Residual-sum budget ``eps_j`` for producing iterate j (j >= 1).

    ``eps_0`` is defined equal to ``eps_1`` so the schedule is total.
    """
    j = max(int(j), 1)
    return inner.eps_hat / (j + 1) ** inner.decay


def save_state(state, path, metadata: dict | None = None) -> None:
    """Binary-exact checkpoint: arrays to ``.npz``, metadata to ``.json``."""
    path = Path(path)
    arrays = dict(state.arrays())
    np.savez(path.with_suffix(".npz"), **arrays)
    meta = dict(metadata or {})
    meta.update(
        {
            "k": state.k,
            "comm_count": state.comm_count,
            "state_kind": type(state).__name__,
        }
    )
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2), encoding="utf-8")


def load_state_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with np.load(path.with_suffix(".npz")) as data:
        arrays = {name: data[name] for name in data.files}
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    return arrays, meta


def check_stack(name: str, arr: np.ndarray, n: int, p: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape != (n, p):
        raise DimensionMismatchError(f"{name} must have shape {(n, p)}, got {arr.shape}")
    return arr
