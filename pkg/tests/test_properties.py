import numpy as np
from hypothesis import given, settings, strategies as st

from adapd.diagnostics import stationarity_parts, stationarity_violation
from adapd.problems import QuadraticConsensus
from adapd.solvers import chebyshev_mix
from adapd.topology import build_erdos_renyi, build_ring, laplacian_weights, metropolis_weights

SETTINGS = dict(max_examples=25, deadline=None)


@st.composite
def random_mixing(draw):
    n = draw(st.integers(min_value=4, max_value=30))
    seed = draw(st.integers(min_value=0, max_value=10_000))
    g = build_erdos_renyi(n, 0.4, rng_seed=seed)
    if draw(st.booleans()):
        return metropolis_weights(g, eps=draw(st.floats(0.5, 3.0)))
    return laplacian_weights(g)


@given(random_mixing())
@settings(**SETTINGS)
def test_mixing_contract_holds_for_random_graphs(w):
    assert np.array_equal(w.w, w.w.T)
    assert np.abs(w.w.sum(axis=1) - 1.0).max() <= 1e-12
    vals = w.eigenvalues
    assert vals[0] > -1.0 + 1e-10
    assert vals[-1] <= 1.0 + 1e-10
    assert np.sum(vals >= 1.0 - 1e-12) == 1


@given(random_mixing(), st.integers(0, 1_000))
@settings(**SETTINGS)
def test_mixing_contracts_disagreement(w, seed):
    x = np.random.default_rng(seed).normal(size=(w.n, 3))
    xbar = np.tile(x.mean(axis=0), (w.n, 1))
    assert np.linalg.norm(w.w @ x - xbar) <= w.rho * np.linalg.norm(x - xbar) * (1 + 1e-12)


@given(st.integers(4, 24), st.integers(1, 6), st.integers(0, 1_000))
@settings(**SETTINGS)
def test_chebyshev_preserves_row_means(n, r, seed):
    w = build_ring(n, 0.5)
    a0 = np.random.default_rng(seed).normal(size=(n, 2))
    out = chebyshev_mix(w, a0, r)
    assert np.abs(out.mean(axis=0) - a0.mean(axis=0)).max() <= 1e-12


@given(st.integers(2, 12), st.integers(1, 5), st.integers(0, 1_000))
@settings(**SETTINGS)
def test_stationarity_decomposition_identity(n, p, seed):
    rng = np.random.default_rng(seed)
    q = QuadraticConsensus(rng.normal(size=(n, p)))
    x = rng.normal(size=(n, p)) * rng.uniform(0.1, 10.0)
    mg2, ce = stationarity_parts(x, q)
    assert stationarity_violation(x, q) == mg2 + ce
    assert mg2 >= 0.0 and ce >= 0.0
