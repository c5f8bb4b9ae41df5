"""Theory-derived runtime metrics and trace serialization.

The primary reported metric is the stationarity violation

    || (1/N) sum_i grad f_i(x_bar) ||^2  +  || X - X_bar ||_F^2

(the sum, not its square root).  The Lyapunov values and dual-relation
residuals below are algebraic identities or monotone certificates of the
primal-dual updates evaluated at unit dual step scale; they serve as live
correctness oracles rather than performance metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError
from .problems import LocalizationInstance, ObjectiveOracle
from .topology import MixingMatrix

__all__ = [
    "consensus_error",
    "stationarity_parts",
    "stationarity_violation",
    "lagrangian_value",
    "adapd_lyapunov_constant",
    "og_lyapunov_constant",
    "lyapunov_adapd",
    "lyapunov_og",
    "lyapunov_slack_coefficient",
    "dual_relation_residual",
    "target_distance",
    "TraceRecord",
    "TRACE_COLUMNS",
    "MetricsRecorder",
    "write_trace_csv",
    "write_trace_jsonl",
    "read_trace_csv",
]


def consensus_error(X: np.ndarray) -> float:
    """Squared Frobenius distance to the row-average matrix."""
    d = X - X.mean(axis=0, keepdims=True)
    return float(np.sum(d * d))


def stationarity_parts(X: np.ndarray, problem: ObjectiveOracle) -> tuple[float, float]:
    """(squared mean-gradient norm at the average row, consensus error)."""
    xbar = X.mean(axis=0)
    g = problem.mean_grad_at(xbar)
    return float(g @ g), consensus_error(X)


def stationarity_violation(X: np.ndarray, problem: ObjectiveOracle) -> float:
    """Stationarity metric; zero exactly at consensual stationary points."""
    mg2, ce = stationarity_parts(X, problem)
    return mg2 + ce


def _mixing_parts(w) -> tuple[np.ndarray, float]:
    """(dense matrix, spectral gap) from a MixingMatrix or an operator."""
    if isinstance(w, MixingMatrix):
        return w.w, w.rho
    return w.matrix, w.rho


def lagrangian_value(state, problem: ObjectiveOracle, w, eta: float) -> float:
    """Augmented Lagrangian at the current iterate blocks.

    The consensus-dual inner product is evaluated as <Ztilde, X0>, which
    equals the pairing of the recovered dual with the root-weighted block;
    no explicit square root is ever formed here.
    """
    mat, _ = _mixing_parts(w)
    X, X0, Y, Zt = state.X, state.X0, state.Y, state.Ztilde
    diff = X - X0
    quad0 = X0 - mat @ X0  # (I - W) X0
    return (
        problem.value_total(X)
        + float(np.sum(Y * diff))
        + float(np.sum(diff * diff)) / (2.0 * eta)
        + float(np.sum(Zt * X0))
        + float(np.sum(X0 * quad0)) / (2.0 * eta)
    )


def adapd_lyapunov_constant(rho: float) -> float:
    return 28.0 / (1.0 - rho) ** 2


def og_lyapunov_constant(rho: float) -> float:
    return 16.0 / (1.0 - rho) ** 2


def lyapunov_adapd(state, problem: ObjectiveOracle, w, eta: float, rho: float | None = None) -> float:
    """Descent certificate for the inexact primal-dual iteration.

    Augmented Lagrangian plus ``C/(2 eta)`` times the consensus penalty of
    X0 and ``C/eta`` times the last X0 displacement, with
    ``C = 28/(1-rho)^2``.  Along iterates with a summable inexactness
    schedule and ``eta < 1/(2 C L)`` this sequence decreases up to the
    schedule's slack (see ``lyapunov_slack_coefficient``).
    """
    mat, rho_w = _mixing_parts(w)
    if rho is None:
        rho = rho_w
    c = adapd_lyapunov_constant(rho)
    x0, x0p = state.X0, state.X0_prev
    quad0 = x0 - mat @ x0
    pen = float(np.sum(x0 * quad0))
    disp = x0 - x0p
    return (
        lagrangian_value(state, problem, w, eta)
        + c / (2.0 * eta) * pen
        + c / eta * float(np.sum(disp * disp))
    )


def lyapunov_og(
    state,
    problem: ObjectiveOracle,
    w,
    eta: float,
    rho: float | None = None,
    smoothness: float | None = None,
) -> float:
    """Strict descent certificate for the one-gradient variant.

    Adds to the inexact-variant terms (with ``C_hat = 16/(1-rho)^2``) an
    X-displacement term weighted by
    ``(4 L^2 (1-rho) eta + 8 L^2 eta + C_hat L (1-rho)) / (2 (1-rho))``.
    Monotone non-increasing when ``eta < 1/(2 C_hat L)``.
    """
    mat, rho_w = _mixing_parts(w)
    if rho is None:
        rho = rho_w
    if smoothness is None:
        hints = problem.smoothness()
        if hints is None:
            raise ValueError("one-gradient Lyapunov needs a smoothness constant")
        smoothness = float(hints.max())
    c_hat = og_lyapunov_constant(rho)
    lam = smoothness
    x0, x0p = state.X0, state.X0_prev
    quad0 = x0 - mat @ x0
    pen = float(np.sum(x0 * quad0))
    disp0 = x0 - x0p
    dispx = state.X - state.X_prev
    coef = (4.0 * lam**2 * (1.0 - rho) * eta + 8.0 * lam**2 * eta + c_hat * lam * (1.0 - rho)) / (
        2.0 * (1.0 - rho)
    )
    return (
        lagrangian_value(state, problem, w, eta)
        + c_hat / (2.0 * eta) * pen
        + c_hat / eta * float(np.sum(disp0 * disp0))
        + coef * float(np.sum(dispx * dispx))
    )


def lyapunov_slack_coefficient(rho: float, eta: float, smoothness: float) -> float:
    """Multiplier of eps_k allowed in the inexact-variant descent check."""
    lam = smoothness
    c = adapd_lyapunov_constant(rho)
    return ((1.0 - rho) + (32.0 * lam + 16.0 * lam * (1.0 - rho)) * eta + 4.0 * c * (1.0 - rho)) / (
        2.0 * lam * (1.0 - rho)
    )


def dual_relation_residual(
    state,
    w,
    eta: float,
    variant: str = "adapd",
    problem: ObjectiveOracle | None = None,
) -> float:
    """Defect of the dual-variable identity, normalized by max(1, ||Y||_F).

    For the inexact variant the identity is
    ``Ztilde = Y - (1/eta) W (X0 - X0_prev)``; for the one-gradient variant
    ``Y = -grad_stack(X_prev) - (1/eta)(X0 - X0_prev)``.  Both hold
    algebraically for every iterate with k >= 1 at unit dual step scale, so
    a float trajectory should only show rounding-level values.
    """
    if state.k < 1:
        raise ValueError("dual relation is defined from the first completed round")
    scale = max(1.0, float(np.linalg.norm(state.Y)))
    disp0 = state.X0 - state.X0_prev
    if variant == "adapd":
        mat, _ = _mixing_parts(w)
        defect = state.Ztilde - state.Y + (mat @ disp0) / eta
    elif variant == "og":
        if problem is None:
            raise ValueError("one-gradient dual relation needs the objective oracle")
        defect = state.Y + problem.grad_stack(state.X_prev) + disp0 / eta
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(np.linalg.norm(defect)) / scale


def target_distance(X: np.ndarray, inst: LocalizationInstance) -> float:
    """Euclidean distance from the average iterate to the stacked targets."""
    truth = inst.stacked_targets()
    if X.shape[1] != truth.shape[0]:
        raise DimensionMismatchError(
            f"iterates have dimension {X.shape[1]}, instance expects {truth.shape[0]}"
        )
    xbar = X.mean(axis=0)
    return float(np.linalg.norm(xbar - truth))


# --- trace records ------------------------------------------------------

TRACE_COLUMNS = (
    "k",
    "comms",
    "grads",
    "stationarity",
    "consensus_err",
    "mean_grad_norm2",
    "objective_F",
    "objective_fbar",
    "lyapunov",
    "dual_residual",
    "wall_time_s",
)


@dataclass
class TraceRecord:
    """One metrics row; ``extras`` appends problem-specific columns."""

    k: int
    comms: int
    grads: int
    stationarity: float
    consensus_err: float
    mean_grad_norm2: float
    objective_F: float
    objective_fbar: float
    lyapunov: float | None = None
    dual_residual: float | None = None
    wall_time_s: float = 0.0
    extras: dict[str, float] = field(default_factory=dict)

    def row(self, extra_names: tuple[str, ...]) -> list:
        base = [
            self.k,
            self.comms,
            self.grads,
            self.stationarity,
            self.consensus_err,
            self.mean_grad_norm2,
            self.objective_F,
            self.objective_fbar,
            self.lyapunov,
            self.dual_residual,
            self.wall_time_s,
        ]
        return base + [self.extras.get(name) for name in extra_names]


class MetricsRecorder:
    """Builds trace rows from a live solver.

    Lyapunov and dual-residual columns are opt-in since they cost extra
    dense algebra; metric-side gradient evaluations are never charged to
    the solver's accounting.
    """

    def __init__(
        self,
        problem: ObjectiveOracle,
        mixing=None,
        eta: float | None = None,
        lyapunov: str | None = None,  # None | "adapd" | "og"
        dual_variant: str | None = None,  # None | "adapd" | "og"
        localization: LocalizationInstance | None = None,
        smoothness: float | None = None,
    ) -> None:
        if lyapunov not in (None, "adapd", "og"):
            raise ValueError(f"unknown lyapunov flavour {lyapunov!r}")
        self.problem = problem
        self.mixing = mixing
        self.eta = eta
        self.lyapunov = lyapunov
        self.dual_variant = dual_variant
        self.localization = localization
        self.smoothness = smoothness

    def extra_names(self) -> tuple[str, ...]:
        return ("target_distance",) if self.localization is not None else ()

    def record(self, solver, wall_time_s: float = 0.0) -> TraceRecord:
        state = solver.state
        X = state.X
        mg2, ce = stationarity_parts(X, self.problem)
        xbar = X.mean(axis=0)
        rec = TraceRecord(
            k=state.k,
            comms=state.comm_count,
            grads=state.grad_count,
            stationarity=mg2 + ce,
            consensus_err=ce,
            mean_grad_norm2=mg2,
            objective_F=self.problem.value_mean(X),
            objective_fbar=self.problem.mean_value_at(xbar),
            wall_time_s=wall_time_s,
        )
        is_pd = hasattr(state, "Ztilde")
        if self.lyapunov is not None and is_pd and self.mixing is not None:
            if self.lyapunov == "adapd":
                rec.lyapunov = lyapunov_adapd(state, self.problem, self.mixing, self.eta)
            else:
                rec.lyapunov = lyapunov_og(
                    state, self.problem, self.mixing, self.eta, smoothness=self.smoothness
                )
        if self.dual_variant is not None and is_pd and state.k >= 1 and self.mixing is not None:
            rec.dual_residual = dual_relation_residual(
                state, self.mixing, self.eta, self.dual_variant, problem=self.problem
            )
        if self.localization is not None:
            rec.extras["target_distance"] = target_distance(X, self.localization)
        return rec


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_trace_csv(records: list[TraceRecord], path) -> None:
    """Write rows with shortest round-trip float formatting (bit-exact reads)."""
    extra_names: tuple[str, ...] = ()
    for rec in records:
        for name in rec.extras:
            if name not in extra_names:
                extra_names = extra_names + (name,)
    header = ",".join(TRACE_COLUMNS + extra_names)
    lines = [header]
    for rec in records:
        lines.append(",".join(_fmt(v) for v in rec.row(extra_names)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trace_jsonl(records: list[TraceRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            doc = {name: getattr(rec, name) for name in TRACE_COLUMNS}
            doc.update(rec.extras)
            fh.write(json.dumps(doc) + "\n")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Read a trace CSV into column arrays (empty cells become NaN)."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    cols: dict[str, list[float]] = {name: [] for name in header}
    for line in text[1:]:
        for name, cell in zip(header, line.split(",")):
            cols[name].append(float(cell) if cell != "" else np.nan)
    out: dict[str, np.ndarray] = {}
    for name, vals in cols.items():
        arr = np.asarray(vals)
        if name in ("k", "comms", "grads") and not np.isnan(arr).any():
            arr = arr.astype(np.int64)
        out[name] = arr
    return out
