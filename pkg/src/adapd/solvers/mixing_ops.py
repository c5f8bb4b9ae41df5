"""Communication operators: plain gossip, matrix powers, Chebyshev mixing.

A solver round communicates by applying one operator to an iterate block.
The plain operator is one multiplication by W (one neighbour exchange); the
multiple-communication variants spend R exchanges per application to act
like a matrix with a much smaller spectral gap.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateSpectrumError, InvalidParameterError
from ..topology import MixingMatrix

__all__ = [
    "chebyshev_mix",
    "default_mc_degree",
    "chebyshev_contraction",
    "MixingOperator",
    "PlainOperator",
    "PowerOperator",
    "ChebyshevOperator",
    "make_operator",
]


def chebyshev_mix(w: MixingMatrix, a0: np.ndarray, R: int) -> np.ndarray:
    """Apply the degree-R scaled-Chebyshev polynomial of W to ``a0``.

    Costs exactly R multiplications by W.  Row means are preserved, and the
    disagreement contracts by at least ``2 (1 - sqrt(1-rho))**R``.  A zero
    spectral gap short-circuits to plain averaging (one multiplication).
    """
    if R < 1:
        raise InvalidParameterError(f"Chebyshev degree must be >= 1, got {R}")
    rho = w.rho
    if rho >= 1.0 - 1e-12:
        raise DegenerateSpectrumError(f"cannot accelerate a spectral gap of {rho}")
    a0 = np.asarray(a0, dtype=float)
    if rho < 1e-14:
        return w.w @ a0
    a_prev = a0
    a_cur = w.w @ a0
    mu_prev, mu_cur = 1.0, 1.0 / rho
    for _ in range(R - 1):
        mu_next = (2.0 / rho) * mu_cur - mu_prev
        a_next = (2.0 * mu_cur / (rho * mu_next)) * (w.w @ a_cur) - (mu_prev / mu_next) * a_prev
        a_prev, a_cur = a_cur, a_next
        mu_prev, mu_cur = mu_cur, mu_next
    return a_cur


def default_mc_degree(rho: float) -> int:
    """Communication rounds per application, ``ceil(2 / sqrt(1 - rho))``."""
    if not 0.0 <= rho < 1.0:
        raise InvalidParameterError(f"rho must lie in [0,1), got {rho}")
    return max(1, math.ceil(2.0 / math.sqrt(1.0 - rho)))


def chebyshev_contraction(rho: float, R: int) -> float:
    """Disagreement contraction factor ``2 (1 - sqrt(1-rho))**R``."""
    return 2.0 * (1.0 - math.sqrt(1.0 - rho)) ** R


class MixingOperator:
    """One communication round: ``apply`` maps an N x p block through it.

    ``cost`` is the number of neighbour exchanges charged per application;
    ``rho`` is the effective spectral gap used by theory-derived defaults.
    """

    cost: int
    rho: float
    base: MixingMatrix

    def apply(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def matrix(self) -> np.ndarray:
        """Dense equivalent of the operator (diagnostics only)."""
        raise NotImplementedError

    @property
    def n(self) -> int:
        return self.base.n


class PlainOperator(MixingOperator):
    def __init__(self, w: MixingMatrix) -> None:
        self.base = w
        self.cost = 1
        self.rho = w.rho

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.base.w @ a

    @property
    def matrix(self) -> np.ndarray:
        return self.base.w


class PowerOperator(MixingOperator):
    """Applies ``W**R`` per round, charged as R exchanges."""

    def __init__(self, w: MixingMatrix, R: int) -> None:
        if R < 1:
            raise InvalidParameterError(f"power R must be >= 1, got {R}")
        self.base = w
        self.R = R
        self.cost = R
        self.rho = w.rho**R
        wr = np.linalg.matrix_power(w.w, R)
        self._matrix = 0.5 * (wr + wr.T)

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self._matrix @ a

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix


class ChebyshevOperator(MixingOperator):
    """Applies the degree-R Chebyshev polynomial of W per round."""

    def __init__(self, w: MixingMatrix, R: int) -> None:
        if R < 1:
            raise InvalidParameterError(f"Chebyshev degree must be >= 1, got {R}")
        self.base = w
        self.R = R
        self.cost = 1 if w.rho < 1e-14 else R
        self.rho = chebyshev_contraction(w.rho, R)
        self._matrix: np.ndarray | None = None

    def apply(self, a: np.ndarray) -> np.ndarray:
        return chebyshev_mix(self.base, a, self.R)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            m = chebyshev_mix(self.base, np.eye(self.base.n), self.R)
            self._matrix = 0.5 * (m + m.T)
        return self._matrix


def make_operator(w: MixingMatrix, cheby_degree: int = 1, mc_mode: str = "chebyshev") -> MixingOperator:
    """Build the communication operator selected by a solver config."""
    if cheby_degree == 1:
        return PlainOperator(w)
    if mc_mode == "power":
        return PowerOperator(w, cheby_degree)
    return ChebyshevOperator(w, cheby_degree)
