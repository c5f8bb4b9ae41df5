import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def finite_difference_grad(f, x, step_scale=1e-6):
    """Central-difference gradient oracle, independent of any analytic path."""
    x = np.asarray(x, dtype=float)
    h = step_scale * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e[d] = h
        g[d] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
