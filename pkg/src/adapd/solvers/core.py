"""Synchronous-round solvers: the primal-dual family and the baselines.

All solvers advance one synchronous round per ``step()`` call and keep
honest cost accounting: ``comm_count`` counts neighbour exchanges (an
R-round operator application charges R), ``grad_counts[i]`` counts agent
i's gradient evaluations.  The primal-dual engine applies the mixing
operator exactly once per round after the first round; the first round
needs one extra application to seed the recursion.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DivergenceError
from ..problems import ObjectiveOracle
from ..rng import stream
from ..topology import Graph, MixingMatrix
from .inner import inner_solve
from .mixing_ops import MixingOperator, make_operator
from .state import (
    AgentState,
    BaselineState,
    InnerResult,
    SolverConfig,
    check_stack,
    eps_schedule,
)

__all__ = ["Adapd", "AdapdOG", "DGD", "ProxGPDA", "TheoryWarning", "make_solver"]


class TheoryWarning(UserWarning):
    """A hyperparameter sits outside the regime the convergence theory covers."""


class _SolverBase:
    kind = "base"

    problem: ObjectiveOracle
    cfg: SolverConfig

    def _guard(self, blocks: dict[str, np.ndarray]) -> None:
        for name, arr in blocks.items():
            norm = float(np.linalg.norm(arr))
            if not np.isfinite(norm) or norm > self.cfg.divergence_norm:
                raise DivergenceError(
                    f"{self.kind}: iterate block {name} diverged at k={self.state.k} "
                    f"(norm {norm:.3e})",
                    snapshot={n: a.copy() for n, a in blocks.items()},
                )

    @property
    def X(self) -> np.ndarray:
        return self.state.X

    def next_step_cost(self) -> int:
        raise NotImplementedError

    def step(self) -> None:
        raise NotImplementedError


class Adapd(_SolverBase):
    """Inexact primal-dual consensus solver.

    Per round every agent drives its local strongly convex subproblem
    residual below ``eps_{k+1}/N``, then the auxiliary block, the
    disagreement dual, and the communicable consensus dual are updated in
    closed form.  Only the consensus-dual update touches the network; the
    mixed auxiliary block it produces is recovered algebraically in the
    next round, so rounds after the first cost exactly one operator
    application.
    """

    kind = "adapd"

    def __init__(
        self,
        problem: ObjectiveOracle,
        mixing: MixingMatrix | MixingOperator,
        cfg: SolverConfig,
        x_start: np.ndarray | None = None,
    ) -> None:
        self.problem = problem
        self.cfg = cfg
        if isinstance(mixing, MixingMatrix):
            self.operator = make_operator(mixing, cfg.cheby_degree, cfg.mc_mode)
        else:
            self.operator = mixing
        n, p = problem.n_agents, problem.dim
        if self.operator.n != n:
            raise ValueError(f"mixing operator is {self.operator.n}-agent, problem has {n}")
        if x_start is None:
            x_start = np.zeros((n, p))
        x_start = check_stack("x_start", x_start, n, p)
        self.state = AgentState(
            X=x_start.copy(),
            X0=x_start.copy(),
            Y=np.zeros((n, p)),
            Ztilde=np.zeros((n, p)),
            X_prev=x_start.copy(),
            X0_prev=x_start.copy(),
            Ztilde_prev=np.zeros((n, p)),
            grad_counts=np.zeros(n, dtype=np.int64),
        )
        self._rng = stream(cfg.seed, "solver")
        self.inexact_misses = 0
        self._check_theory()

    def _check_theory(self) -> None:
        pass

    def _smoothness_hint(self) -> float | None:
        if self.cfg.inner.l_hat is not None:
            return float(self.cfg.inner.l_hat)
        hints = self.problem.smoothness()
        return None if hints is None else float(hints.max())

    def next_step_cost(self) -> int:
        c = self.operator.cost
        return 2 * c if self.state.k == 0 else c

    # primal update -----------------------------------------------------

    def _update_x(self) -> np.ndarray:
        s = self.state
        n = self.problem.n_agents
        tol = eps_schedule(self.cfg.inner, s.k + 1) / n
        x_new = np.empty_like(s.X)
        for i in range(n):
            res: InnerResult = inner_solve(
                self.problem,
                i,
                s.X[i],
                s.Y[i],
                s.X0[i],
                self.cfg.eta,
                tol,
                self.cfg.inner,
                rng=self._rng,
            )
            x_new[i] = res.x
            s.grad_counts[i] += res.grad_evals
            if not res.converged:
                self.inexact_misses += 1
        return x_new

    # one synchronous round ----------------------------------------------

    def step(self) -> None:
        s = self.state
        eta = self.cfg.eta
        scale = self.cfg.dual_step_scale
        if s.k == 0:
            mixed_x0 = self.operator.apply(s.X0)
            s.comm_count += self.operator.cost
        else:
            # operator(X0^k) recovered from the two latest consensus duals
            mixed_x0 = s.X0 - (eta / scale) * (s.Ztilde - s.Ztilde_prev)

        x_new = self._update_x()
        x0_new = 0.5 * (mixed_x0 + x_new + eta * (s.Y - s.Ztilde))
        y_new = s.Y + (scale / eta) * (x_new - x0_new)
        mixed_x0_new = self.operator.apply(x0_new)
        s.comm_count += self.operator.cost
        zt_new = s.Ztilde + (scale / eta) * (x0_new - mixed_x0_new)

        self._guard({"X": x_new, "X0": x0_new, "Y": y_new, "Ztilde": zt_new})

        s.X_prev, s.X = s.X, x_new
        s.X0_prev, s.X0 = s.X0, x0_new
        s.Y = y_new
        s.Ztilde_prev, s.Ztilde = s.Ztilde, zt_new
        s.k += 1


class AdapdOG(Adapd):
    """One-gradient variant: the inner solve becomes a single forward step.

    Every agent replaces its subproblem solve with
    ``x0_i - eta * (grad f_i(x_i) + y_i)``; everything else matches the
    parent update, so each round costs one gradient and one communication
    per agent.
    """

    kind = "adapd_og"

    def _check_theory(self) -> None:
        l_hat = self._smoothness_hint()
        if l_hat is None:
            return
        rho = self.operator.rho
        if rho >= 1.0:
            return
        c_hat = 16.0 / (1.0 - rho) ** 2
        bound = 1.0 / (2.0 * c_hat * l_hat)
        if self.cfg.eta >= bound:
            warnings.warn(
                f"eta={self.cfg.eta:.3g} is outside the one-gradient theory regime "
                f"(< {bound:.3g} for rho={rho:.3g}, L={l_hat:.3g}); "
                "convergence is no longer guaranteed",
                TheoryWarning,
                stacklevel=3,
            )

    def _update_x(self) -> np.ndarray:
        s = self.state
        if self.cfg.batch_size is not None and self.problem.has_batch_grad:
            g = np.stack(
                [
                    self.problem.batch_grad(i, s.X[i], self.cfg.batch_size, self._rng)
                    for i in range(self.problem.n_agents)
                ]
            )
        else:
            g = self.problem.grad_stack(s.X)
        s.grad_counts += 1
        return s.X0 - self.cfg.eta * (g + s.Y)


class DGD(_SolverBase):
    """Decentralized gradient descent with a diminishing step size.

    ``X <- W X - alpha_k grad`` with ``alpha_k = alpha0 / (k+1)**q``; one
    exchange and one gradient per agent per round.
    """

    kind = "dgd"

    def __init__(
        self,
        problem: ObjectiveOracle,
        mixing: MixingMatrix | MixingOperator,
        cfg: SolverConfig,
        x_start: np.ndarray | None = None,
    ) -> None:
        self.problem = problem
        self.cfg = cfg
        if cfg.alpha0 <= 0 or not 0.0 < cfg.dgd_decay <= 1.0:
            raise ValueError("DGD needs alpha0 > 0 and decay q in (0, 1]")
        self.operator = (
            make_operator(mixing, cfg.cheby_degree, cfg.mc_mode)
            if isinstance(mixing, MixingMatrix)
            else mixing
        )
        n, p = problem.n_agents, problem.dim
        if x_start is None:
            x_start = np.zeros((n, p))
        x_start = check_stack("x_start", x_start, n, p)
        self.state = BaselineState(
            X=x_start.copy(), X_prev=x_start.copy(), grad_counts=np.zeros(n, dtype=np.int64)
        )

    def next_step_cost(self) -> int:
        return self.operator.cost

    def step(self) -> None:
        s = self.state
        alpha = self.cfg.alpha0 / (s.k + 1) ** self.cfg.dgd_decay
        g = self.problem.grad_stack(s.X)
        s.grad_counts += 1
        x_new = self.operator.apply(s.X) - alpha * g
        s.comm_count += self.operator.cost
        self._guard({"X": x_new})
        s.X_prev, s.X = s.X, x_new
        s.k += 1


class ProxGPDA(_SolverBase):
    """Single-gradient proximal primal-dual baseline on edge constraints.

    Linearized primal step
    ``X <- X - (2 beta D)^{-1} (grad + alpha + beta L X)`` followed by the
    dual step ``alpha <- alpha + beta L X_new`` with the signed Laplacian L
    and degree matrix D.  The Laplacian product needed twice per round is
    exchanged once and cached, so rounds after the first cost one exchange.
    """

    kind = "prox_gpda"

    def __init__(
        self,
        problem: ObjectiveOracle,
        graph: Graph,
        cfg: SolverConfig,
        x_start: np.ndarray | None = None,
    ) -> None:
        self.problem = problem
        self.cfg = cfg
        if cfg.beta <= 0:
            raise ValueError(f"beta must be positive, got {cfg.beta}")
        self.graph = graph
        self._lap = graph.laplacian()
        deg = graph.degrees.astype(float)
        if np.any(deg == 0):
            raise ValueError("Prox-GPDA needs every agent to have a neighbour")
        self._inv_scale = 1.0 / (2.0 * cfg.beta * deg)[:, None]
        n, p = problem.n_agents, problem.dim
        if x_start is None:
            x_start = np.zeros((n, p))
        x_start = check_stack("x_start", x_start, n, p)
        self.state = BaselineState(
            X=x_start.copy(), X_prev=x_start.copy(), grad_counts=np.zeros(n, dtype=np.int64)
        )
        self.alpha = np.zeros((n, p))
        self._lap_x: np.ndarray | None = None

    def next_step_cost(self) -> int:
        return 2 if self.state.k == 0 else 1

    def step(self) -> None:
        s = self.state
        beta = self.cfg.beta
        if self._lap_x is None:
            self._lap_x = self._lap @ s.X
            s.comm_count += 1
        g = self.problem.grad_stack(s.X)
        s.grad_counts += 1
        x_new = s.X - self._inv_scale * (g + self.alpha + beta * self._lap_x)
        lap_x_new = self._lap @ x_new
        s.comm_count += 1
        alpha_new = self.alpha + beta * lap_x_new
        self._guard({"X": x_new, "alpha": alpha_new})
        s.X_prev, s.X = s.X, x_new
        self.alpha = alpha_new
        self._lap_x = lap_x_new
        s.k += 1


_SOLVERS = {
    "adapd": Adapd,
    "adapd_og": AdapdOG,
    "dgd": DGD,
    "prox_gpda": ProxGPDA,
}


def make_solver(
    kind: str,
    problem: ObjectiveOracle,
    mixing: MixingMatrix | None,
    cfg: SolverConfig,
    graph: Graph | None = None,
    x_start: np.ndarray | None = None,
):
    """Instantiate a solver by name; Prox-GPDA takes the graph directly."""
    if kind not in _SOLVERS:
        raise ValueError(f"unknown solver {kind!r}; choose from {sorted(_SOLVERS)}")
    if kind == "prox_gpda":
        if graph is None:
            graph = mixing.graph if mixing is not None else None
        if graph is None:
            raise ValueError("prox_gpda needs a graph")
        return ProxGPDA(problem, graph, cfg, x_start=x_start)
    if mixing is None:
        raise ValueError(f"{kind} needs a mixing matrix")
    return _SOLVERS[kind](problem, mixing, cfg, x_start=x_start)
