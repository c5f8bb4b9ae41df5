"""Local subproblem solvers for the primal update.

Each agent rounds off its primal step by driving the residual

    r(x) = grad f_i(x) + y_i + (x - x0_i) / eta

below a per-iteration tolerance; r is exactly the gradient of the strongly
convex local model g(x) = f_i(x) + <y_i, x - x0_i> + ||x - x0_i||^2/(2 eta).
"""

from __future__ import annotations

import numpy as np

from ..errors import InexactnessError, InvalidParameterError
from ..problems import ObjectiveOracle
from .state import InnerConfig, InnerResult

__all__ = ["inner_solve"]


def _local_smoothness(oracle: ObjectiveOracle, i: int, cfg: InnerConfig) -> float:
    if cfg.l_hat is not None:
        return float(cfg.l_hat)
    hints = oracle.smoothness()
    if hints is None:
        raise InvalidParameterError(
            "inner solver needs a smoothness bound: oracle has no hint and "
            "no l_hat override was configured"
        )
    return float(hints[i])


def inner_solve(
    oracle: ObjectiveOracle,
    i: int,
    x_init: np.ndarray,
    y_i: np.ndarray,
    x0_i: np.ndarray,
    eta: float,
    tol: float,
    cfg: InnerConfig,
    rng: np.random.Generator | None = None,
) -> InnerResult:
    """Solve agent i's local subproblem until ``||r||^2 <= tol``.

    Methods: ``exact`` uses the oracle's closed-form solution; ``fista`` is
    the accelerated proximal-gradient loop with restart on objective
    increase; ``gradient_descent`` takes plain steps of size
    ``eta / (1 + eta * l_hat)``; ``sgd`` takes mini-batch steps and
    certifies the residual with periodic full-gradient checks.

    A missed tolerance raises unless ``cfg.best_effort`` is set, in which
    case the best iterate found is returned with ``converged=False``.
    """
    if cfg.method == "exact":
        x = oracle.prox(i, y_i, x0_i, eta)
        r = oracle.grad(i, x) + y_i + (x - x0_i) / eta
        rsq = float(r @ r)
        return InnerResult(x=x, residual_sq=rsq, iterations=0, grad_evals=1, converged=rsq <= tol)

    l_hat = _local_smoothness(oracle, i, cfg)
    step = eta / (1.0 + eta * l_hat)

    def residual(x: np.ndarray) -> np.ndarray:
        return oracle.grad(i, x) + y_i + (x - x0_i) / eta

    def model_value(x: np.ndarray) -> float:
        d = x - x0_i
        return oracle.value(i, x) + float(y_i @ d) + float(d @ d) / (2.0 * eta)

    grad_evals = 0
    x = np.array(x_init, dtype=float)

    if cfg.method == "gradient_descent":
        best_x, best_rsq = x, np.inf
        for it in range(cfg.max_iterations + 1):
            r = residual(x)
            grad_evals += 1
            rsq = float(r @ r)
            if rsq < best_rsq:
                best_x, best_rsq = x, rsq
            if rsq <= tol:
                return InnerResult(x, rsq, it, grad_evals, True)
            if it == cfg.max_iterations:
                break
            x = x - step * r
        return _miss(best_x, best_rsq, grad_evals, cfg)

    if cfg.method == "sgd":
        if rng is None:
            raise InvalidParameterError("sgd inner method needs a random generator")
        if not oracle.has_batch_grad or cfg.batch_size is None:
            raise InvalidParameterError("sgd inner method needs batch_size and a batch gradient")
        best_x, best_rsq = x, np.inf
        check_every = 10
        for it in range(1, cfg.max_iterations + 1):
            g = oracle.batch_grad(i, x, cfg.batch_size, rng) + y_i + (x - x0_i) / eta
            grad_evals += 1
            x = x - step * g
            if it % check_every == 0 or it == cfg.max_iterations:
                r = residual(x)
                grad_evals += 1
                rsq = float(r @ r)
                if rsq < best_rsq:
                    best_x, best_rsq = x, rsq
                if rsq <= tol:
                    return InnerResult(x, rsq, it, grad_evals, True)
        return _miss(best_x, best_rsq, grad_evals, cfg)

    # fista
    x_prev = x
    z = x
    t = 1.0
    best_x, best_rsq = x, np.inf
    g_best = np.inf
    for it in range(cfg.max_iterations + 1):
        r = residual(x)
        grad_evals += 1
        rsq = float(r @ r)
        if rsq < best_rsq:
            best_x, best_rsq = x, rsq
        if rsq <= tol:
            return InnerResult(x, rsq, it, grad_evals, True)
        if it == cfg.max_iterations:
            break
        gz = residual(z)
        grad_evals += 1
        x_new = z - step * gz
        g_new = model_value(x_new)
        if g_new > g_best:
            # restart the momentum when the model value increases
            t = 1.0
            z = x
            x_new = x - step * r
            g_new = model_value(x_new)
        g_best = min(g_best, g_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x_prev)
        x_prev = x
        x = x_new
        t = t_new
    return _miss(best_x, best_rsq, grad_evals, cfg)


def _miss(best_x: np.ndarray, best_rsq: float, grad_evals: int, cfg: InnerConfig) -> InnerResult:
    if not cfg.best_effort:
        raise InexactnessError(
            f"inner solve missed tolerance after {cfg.max_iterations} iterations "
            f"(best residual^2 {best_rsq:.3e})",
            best_residual_sq=best_rsq,
            iterations=cfg.max_iterations,
        )
    return InnerResult(best_x, best_rsq, cfg.max_iterations, grad_evals, False)
