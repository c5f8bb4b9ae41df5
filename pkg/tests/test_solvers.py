import numpy as np
import pytest

from adapd.errors import DivergenceError, InexactnessError
from adapd.problems import QuadraticConsensus
from adapd.solvers import (
    Adapd,
    AdapdOG,
    DGD,
    InnerConfig,
    ProxGPDA,
    SolverConfig,
    TheoryWarning,
    load_state_arrays,
    make_solver,
    save_state,
)
from adapd.topology import Graph, MixingMatrix, build_erdos_renyi, build_ring, metropolis_weights
from adapd.diagnostics import dual_relation_residual, stationarity_violation


def exact_cfg(eta, **kw):
    return SolverConfig(eta=eta, inner=InnerConfig(method="exact"), **kw)


def dense_reference(problem, w_mat, eta, x_start, iters):
    """Straight-line transcription of the four matrix updates.

    Uses an explicit multiplication by W for the auxiliary update at every
    iteration (two per round) rather than the solver's one-exchange
    recursion; exact local solutions via the oracle's closed form.
    """
    n = problem.n_agents
    X = x_start.copy()
    X0 = x_start.copy()
    Y = np.zeros_like(X)
    Zt = np.zeros_like(X)
    eye = np.eye(n)
    out = []
    for _ in range(iters):
        Xn = np.stack([problem.prox(i, Y[i], X0[i], eta) for i in range(n)])
        X0n = 0.5 * (w_mat @ X0 + Xn + eta * (Y - Zt))
        Yn = Y + (Xn - X0n) / eta
        Ztn = Zt + ((eye - w_mat) @ X0n) / eta
        X, X0, Y, Zt = Xn, X0n, Yn, Ztn
        out.append((X.copy(), X0.copy(), Y.copy(), Zt.copy()))
    return out


def agent_view_loop(problem, w, eta, x_start, iters):
    """Literal per-agent loop with neighbour sums, including the first-round
    branch that contacts neighbours for the auxiliary block directly."""
    n = problem.n_agents
    nbrs = w.graph.neighbors
    wm = w.w
    x = x_start.copy()
    x0 = x_start.copy()
    y = np.zeros_like(x)
    zt = np.zeros_like(x)
    zt_prev = np.zeros_like(x)
    out = []
    for k in range(iters):
        xn = np.stack([problem.prox(i, y[i], x0[i], eta) for i in range(n)])
        x0n = np.empty_like(x0)
        for i in range(n):
            if k == 0:
                mix = wm[i, i] * x0[i] + sum(wm[i, j] * x0[j] for j in nbrs[i])
                x0n[i] = 0.5 * (mix + xn[i] + eta * (y[i] - zt[i]))
            else:
                x0n[i] = 0.5 * (xn[i] + x0[i] + eta * (y[i] - 2.0 * zt[i] + zt_prev[i]))
        yn = np.empty_like(y)
        ztn = np.empty_like(zt)
        for i in range(n):
            yn[i] = y[i] + (xn[i] - x0n[i]) / eta
            ztn[i] = (
                zt[i]
                + (1.0 - wm[i, i]) / eta * x0n[i]
                - sum(wm[i, j] * x0n[j] for j in nbrs[i]) / eta
            )
        x, x0, y, zt_prev, zt = xn, x0n, yn, zt, ztn
        out.append((x.copy(), x0.copy(), y.copy(), zt.copy()))
    return out


class TestInit:
    def test_blocks_and_counters(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        start = rng.normal(size=(4, 2))
        s = Adapd(q, w, exact_cfg(0.4), x_start=start)
        st = s.state
        assert np.array_equal(st.X, start) and np.array_equal(st.X0, start)
        assert not np.any(st.Y) and not np.any(st.Ztilde)
        assert np.array_equal(st.X0_prev, st.X0)
        assert st.comm_count == 0 and st.grad_count == 0
        assert np.abs(st.Ztilde.sum(axis=0)).max() == 0.0

    def test_consensus_start_zero_consensus_error(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        start = np.tile(rng.normal(size=2), (4, 1))
        s = Adapd(q, w, exact_cfg(0.4), x_start=start)
        assert np.linalg.norm(s.X - s.X.mean(axis=0)) == 0.0


class TestTranscription:
    def test_engine_matches_dense_and_agent_view(self, rng):
        w = metropolis_weights(build_erdos_renyi(5, 0.6, rng_seed=3))
        q = QuadraticConsensus(rng.normal(size=(5, 3)))
        eta = 0.25
        start = rng.normal(size=(5, 3))
        dense = dense_reference(q, w.w, eta, start, 20)
        agent = agent_view_loop(q, w, eta, start, 20)
        eng = Adapd(q, w, exact_cfg(eta), x_start=start)
        for k in range(20):
            eng.step()
            st = eng.state
            for got, (d, a) in zip(
                (st.X, st.X0, st.Y, st.Ztilde),
                zip(dense[k], agent[k]),
            ):
                assert np.abs(got - d).max() <= 1e-12
                assert np.abs(got - a).max() <= 1e-12

    def test_one_gradient_matches_hand_rolled(self, rng):
        # two rounds of the forward-step variant on two agents, written out
        # in dense matrix algebra with explicit W products
        g = Graph(n=2, edges=((0, 1),))
        w = metropolis_weights(g, eps=1.0)
        q = QuadraticConsensus(rng.normal(size=(2, 3)))
        eta = 0.3
        start = rng.normal(size=(2, 3))
        X = start.copy(); X0 = start.copy()
        Y = np.zeros_like(X); Zt = np.zeros_like(X)
        eye = np.eye(2)
        ref = []
        for _ in range(2):
            Xn = X0 - eta * ((X - q.targets) + Y)
            X0n = 0.5 * (w.w @ X0 + Xn + eta * (Y - Zt))
            Yn = Y + (Xn - X0n) / eta
            Ztn = Zt + ((eye - w.w) @ X0n) / eta
            X, X0, Y, Zt = Xn, X0n, Yn, Ztn
            ref.append((X.copy(), X0.copy(), Y.copy(), Zt.copy()))
        s = AdapdOG(q, w, SolverConfig(eta=eta), x_start=start)
        for k in range(2):
            s.step()
            st = s.state
            for got, want in zip((st.X, st.X0, st.Y, st.Ztilde), ref[k]):
                assert np.abs(got - want).max() <= 1e-12


class TestFixedPoint:
    def test_stationary_consensus_is_fixed(self, rng):
        q = QuadraticConsensus(rng.normal(size=(5, 3)))
        w = build_ring(5, 0.5)
        xbar = q.x_star
        Xf = np.tile(xbar, (5, 1))
        Yf = q.targets - Xf  # -grad rows
        s = Adapd(q, w, exact_cfg(0.4))
        st = s.state
        st.X[:], st.X0[:], st.Y[:], st.Ztilde[:] = Xf, Xf, Yf, Yf
        st.X_prev[:], st.X0_prev[:], st.Ztilde_prev[:] = Xf, Xf, Yf
        for _ in range(3):
            s.step()
        assert np.abs(s.state.X - Xf).max() <= 1e-10
        assert np.abs(s.state.X0 - Xf).max() <= 1e-10
        assert np.abs(s.state.Y - Yf).max() <= 1e-10
        assert np.abs(s.state.Ztilde - Yf).max() <= 1e-10

    def test_single_agent_reduces_to_proximal_point(self, rng):
        g = Graph(n=1, edges=())
        w = MixingMatrix(w=np.array([[1.0]]), rho=0.0, source="trivial", graph=g)
        q = QuadraticConsensus(rng.normal(size=(1, 3)))
        s = Adapd(q, w, exact_cfg(0.5))
        for _ in range(200):
            s.step()
        assert np.abs(s.state.Ztilde).max() == 0.0
        assert np.linalg.norm(s.X[0] - q.targets[0]) <= 1e-10

    def test_og_forward_step_degenerates(self, rng):
        # zero gradient and zero dual: the new X is exactly the auxiliary block
        q = QuadraticConsensus(rng.normal(size=(3, 2)))
        w = build_ring(3, 0.5)
        s = AdapdOG(q, w, SolverConfig(eta=0.2), x_start=q.targets.copy())
        x0_before = s.state.X0.copy()
        s.step()
        assert np.array_equal(s.state.X, x0_before)


class TestAccounting:
    def test_adapd_comm_counts(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        s = Adapd(q, w, exact_cfg(0.4))
        assert s.next_step_cost() == 2
        s.step()
        assert s.state.comm_count == 2
        for expected in (3, 4, 5):
            assert s.next_step_cost() == 1
            s.step()
            assert s.state.comm_count == expected

    def test_mc_comm_counts(self, rng):
        q = QuadraticConsensus(rng.normal(size=(8, 2)))
        w = build_ring(8, 0.5)
        s = Adapd(q, w, exact_cfg(0.4, cheby_degree=3))
        assert s.next_step_cost() == 6
        s.step()
        assert s.state.comm_count == 6
        s.step()
        assert s.state.comm_count == 9

    def test_og_one_gradient_one_comm_per_round(self, rng):
        q = QuadraticConsensus(rng.normal(size=(5, 2)))
        w = build_ring(5, 0.5)
        s = AdapdOG(q, w, SolverConfig(eta=0.05))
        for k in range(1, 6):
            s.step()
            assert np.all(s.state.grad_counts == k)
            assert s.state.comm_count == k + 1  # first round seeds one extra

    def test_power_mode_degree_one_identical_to_plain(self, rng):
        q = QuadraticConsensus(rng.normal(size=(6, 2)))
        w = build_ring(6, 0.5)
        start = rng.normal(size=(6, 2))
        a = Adapd(q, w, exact_cfg(0.3, cheby_degree=1), x_start=start)
        b = Adapd(q, w, exact_cfg(0.3, cheby_degree=1, mc_mode="power"), x_start=start)
        for _ in range(10):
            a.step(); b.step()
        assert np.array_equal(a.state.X, b.state.X)

    def test_og_theory_warning(self, rng):
        q = QuadraticConsensus(rng.normal(size=(5, 2)))
        w = build_ring(5, 0.5)
        with pytest.warns(TheoryWarning):
            AdapdOG(q, w, SolverConfig(eta=0.5))


class TestDualRelations:
    def test_adapd_relation_along_trajectory(self, rng):
        q = QuadraticConsensus(rng.normal(size=(20, 4)))
        w = metropolis_weights(build_erdos_renyi(20, 0.25, rng_seed=2))
        cfg = SolverConfig(eta=0.2, inner=InnerConfig(method="fista", eps_hat=1e-4))
        s = Adapd(q, w, cfg)
        worst = 0.0
        for _ in range(100):
            s.step()
            worst = max(worst, dual_relation_residual(s.state, w, cfg.eta, "adapd"))
            scale = max(np.linalg.norm(s.state.Ztilde), 1.0)
            assert np.abs(s.state.Ztilde.sum(axis=0)).max() <= 1e-8 * scale
        assert worst <= 1e-6

    def test_og_relation_along_trajectory(self, rng):
        q = QuadraticConsensus(rng.normal(size=(6, 3)))
        w = build_ring(6, 0.5)
        s = AdapdOG(q, w, SolverConfig(eta=0.02))
        worst = 0.0
        for _ in range(50):
            s.step()
            worst = max(worst, dual_relation_residual(s.state, w, 0.02, "og", problem=q))
        assert worst <= 1e-6

    def test_corrupted_dual_detected(self, rng):
        q = QuadraticConsensus(rng.normal(size=(5, 2)))
        w = build_ring(5, 0.5)
        s = Adapd(q, w, exact_cfg(0.3))
        for _ in range(5):
            s.step()
        s.state.Y[0, 0] += 1.0
        res = dual_relation_residual(s.state, w, 0.3, "adapd")
        assert res >= 0.5 / max(1.0, np.linalg.norm(s.state.Y))


class TestBaselines:
    def test_dgd_fixed_at_shared_stationary_point(self):
        # identical objectives: every local gradient vanishes at the target
        target = np.array([1.5, -2.0])
        q = QuadraticConsensus(np.tile(target, (4, 1)))
        w = build_ring(4, 0.5)
        s = DGD(q, w, SolverConfig(alpha0=0.7), x_start=np.tile(target, (4, 1)))
        s.step()
        assert np.abs(s.X - target).max() <= 1e-15

    def test_dgd_converges_to_neighborhood(self, rng):
        q = QuadraticConsensus(rng.normal(size=(6, 2)))
        w = build_ring(6, 0.5)
        s = DGD(q, w, SolverConfig(alpha0=0.5, dgd_decay=0.6))
        for _ in range(800):
            s.step()
        assert np.linalg.norm(s.X.mean(axis=0) - q.x_star) <= 0.05

    def test_dgd_one_step_hand_transcription(self, rng):
        q = QuadraticConsensus(rng.normal(size=(2, 3)))
        g = Graph(n=2, edges=((0, 1),))
        w = metropolis_weights(g)
        start = rng.normal(size=(2, 3))
        s = DGD(q, w, SolverConfig(alpha0=0.2, dgd_decay=0.5), x_start=start)
        s.step()
        expected = w.w @ start - 0.2 * (start - q.targets)
        assert np.abs(s.X - expected).max() <= 1e-15

    def test_prox_gpda_consensus_start_is_scaled_gradient_step(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        xbar = rng.normal(size=2)
        start = np.tile(xbar, (4, 1))
        s = ProxGPDA(q, w.graph, SolverConfig(beta=1.5), x_start=start)
        s.step()
        deg = w.graph.degrees.astype(float)
        expected = start - (start - q.targets) / (2 * 1.5 * deg)[:, None]
        assert np.abs(s.X - expected).max() <= 1e-14

    def test_prox_gpda_two_agent_transcription(self, rng):
        q = QuadraticConsensus(rng.normal(size=(2, 2)))
        g = Graph(n=2, edges=((0, 1),))
        beta = 0.8
        start = rng.normal(size=(2, 2))
        lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
        X = start.copy()
        alpha = np.zeros_like(X)
        lap_x = lap @ X
        ref = []
        for _ in range(3):
            Xn = X - (q.grad_stack(X) + alpha + beta * lap_x) / (2 * beta)
            lap_x = lap @ Xn
            alpha = alpha + beta * lap_x
            X = Xn
            ref.append((X.copy(), alpha.copy()))
        s = ProxGPDA(q, g, SolverConfig(beta=beta), x_start=start)
        for k in range(3):
            s.step()
            assert np.abs(s.X - ref[k][0]).max() <= 1e-12
            assert np.abs(s.alpha - ref[k][1]).max() <= 1e-12

    def test_prox_gpda_dual_mean_zero(self, rng):
        q = QuadraticConsensus(rng.normal(size=(6, 3)))
        w = build_ring(6, 0.5)
        s = ProxGPDA(q, w.graph, SolverConfig(beta=1.0))
        for _ in range(40):
            s.step()
            assert np.abs(s.alpha.sum(axis=0)).max() <= 1e-10

    def test_prox_gpda_comm_counts(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        s = ProxGPDA(q, w.graph, SolverConfig(beta=1.0))
        assert s.next_step_cost() == 2
        s.step()
        assert s.state.comm_count == 2
        s.step()
        assert s.state.comm_count == 3


class TestGuards:
    def test_divergence_raises_with_snapshot(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        s = DGD(q, w, SolverConfig(alpha0=1e9, dgd_decay=0.5), x_start=np.full((4, 2), 1e6))
        with pytest.raises(DivergenceError) as err:
            for _ in range(50):
                s.step()
        assert "X" in err.value.snapshot

    def _hard_problem(self, rng):
        from adapd.problems import LogisticNonconvex, make_synthetic_classification, partition_uniform

        data = partition_uniform(make_synthetic_classification(60, 4, 5), 3, seed=5)
        return LogisticNonconvex(data, alpha=0.5)

    def test_inexactness_hard_error_by_default(self, rng):
        oracle = self._hard_problem(rng)
        w = build_ring(3, 0.5)
        cfg = SolverConfig(
            eta=0.3, inner=InnerConfig(method="gradient_descent", eps_hat=1e-18, max_iterations=1)
        )
        s = Adapd(oracle, w, cfg, x_start=rng.normal(size=(3, 4)) * 10)
        with pytest.raises(InexactnessError):
            s.step()

    def test_best_effort_counts_misses(self, rng):
        oracle = self._hard_problem(rng)
        w = build_ring(3, 0.5)
        cfg = SolverConfig(
            eta=0.3,
            inner=InnerConfig(
                method="gradient_descent", eps_hat=1e-18, max_iterations=1, best_effort=True
            ),
        )
        s = Adapd(oracle, w, cfg, x_start=rng.normal(size=(3, 4)) * 10)
        s.step()
        assert s.inexact_misses > 0


class TestFactoryAndCheckpoint:
    def test_factory_dispatch(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        assert isinstance(make_solver("adapd", q, w, exact_cfg(0.3)), Adapd)
        assert isinstance(make_solver("adapd_og", q, w, SolverConfig(eta=0.01)), AdapdOG)
        assert isinstance(make_solver("dgd", q, w, SolverConfig()), DGD)
        assert isinstance(make_solver("prox_gpda", q, w, SolverConfig()), ProxGPDA)
        with pytest.raises(ValueError):
            make_solver("unknown", q, w, SolverConfig())

    def test_checkpoint_roundtrip_binary_exact(self, rng, tmp_path):
        q = QuadraticConsensus(rng.normal(size=(4, 2)))
        w = build_ring(4, 0.5)
        s = Adapd(q, w, exact_cfg(0.3))
        for _ in range(7):
            s.step()
        save_state(s.state, tmp_path / "ckpt", metadata={"eta": 0.3, "kind": s.kind})
        arrays, meta = load_state_arrays(tmp_path / "ckpt")
        assert meta["k"] == 7 and meta["kind"] == "adapd"
        for name, arr in s.state.arrays().items():
            assert np.array_equal(arrays[name], arr)
