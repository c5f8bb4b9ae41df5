from pathlib import Path

import numpy as np
import pytest

from adapd.errors import LabelDomainError, ParseError, PartitionError
from adapd.problems import (
    BinaryDataset,
    LocalizationInstance,
    LocalizationObjective,
    LogisticNonconvex,
    QuadraticConsensus,
    estimate_smoothness,
    generate_localization_instance,
    make_synthetic_classification,
    parse_libsvm,
    partition_uniform,
)
from conftest import finite_difference_grad

A9A_PATH = Path(__file__).parent / "data" / "a9a"


def small_logistic(alpha, m=60, p=5, n_agents=3, seed=1):
    data = make_synthetic_classification(m, p, seed)
    return LogisticNonconvex(partition_uniform(data, n_agents, seed), alpha)


class TestQuadratic:
    def test_identical_targets(self):
        q = QuadraticConsensus(np.tile([2.0, -1.0], (4, 1)))
        assert np.allclose(q.x_star, [2.0, -1.0])

    def test_mean_minimizer(self):
        q = QuadraticConsensus(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
        assert np.allclose(q.x_star, [0.0, 0.0])
        assert np.allclose(q.mean_grad_at(q.x_star), 0.0)

    def test_mean_gradient_identity(self, rng):
        targets = rng.normal(size=(5, 3))
        q = QuadraticConsensus(targets)
        x = rng.normal(size=3)
        assert np.allclose(q.mean_grad_at(x), x - targets.mean(axis=0), atol=1e-14)

    def test_prox_solves_subproblem(self, rng):
        q = QuadraticConsensus(rng.normal(size=(3, 4)))
        y, x0, eta = rng.normal(size=4), rng.normal(size=4), 0.7
        x = q.prox(1, y, x0, eta)
        residual = q.grad(1, x) + y + (x - x0) / eta
        assert np.linalg.norm(residual) < 1e-14


class TestLogistic:
    def test_value_and_grad_at_zero(self):
        oracle = small_logistic(alpha=0.5)
        feats, labs = oracle.data.agent_slice(0)
        x0 = np.zeros(oracle.dim)
        assert oracle.value(0, x0) == pytest.approx(np.log(2.0), rel=1e-12)
        expected = -(feats * (labs / 2.0)[:, None]).mean(axis=0)
        assert np.allclose(oracle.grad(0, x0), expected, atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.01, 1.0])
    def test_experiment_alphas_supported(self, alpha):
        oracle = small_logistic(alpha)
        x = np.ones(oracle.dim)
        assert np.isfinite(oracle.value(0, x))

    def test_single_sample_gradient_vs_fd(self):
        data = BinaryDataset(
            features=np.array([[1.0, 0.0]]), labels=np.array([1.0]), partition=(np.array([0]),)
        )
        oracle = LogisticNonconvex(data, alpha=1.0)
        x = np.array([1.0, 1.0])
        g = oracle.grad(0, x)
        g_fd = finite_difference_grad(lambda z: oracle.value(0, z), x)
        assert np.linalg.norm(g - g_fd) <= 1e-6 * max(1.0, np.linalg.norm(g_fd))

    def test_gradient_matches_fd_at_random_points(self, rng):
        oracle = small_logistic(alpha=0.3)
        for _ in range(20):
            i = int(rng.integers(oracle.n_agents))
            x = rng.normal(size=oracle.dim)
            g = oracle.grad(i, x)
            g_fd = finite_difference_grad(lambda z: oracle.value(i, z), x)
            assert np.linalg.norm(g - g_fd) <= 1e-5 * max(1.0, np.linalg.norm(g_fd))

    def test_convex_when_unregularized(self, rng):
        oracle = small_logistic(alpha=0.0)
        for _ in range(20):
            i = int(rng.integers(oracle.n_agents))
            x, y = rng.normal(size=oracle.dim), rng.normal(size=oracle.dim)
            gap = oracle.grad(i, x) - oracle.grad(i, y)
            assert float(gap @ (x - y)) >= -1e-12

    def test_smoothness_bound_sampled(self, rng):
        oracle = small_logistic(alpha=0.7)
        bounds = oracle.smoothness()
        for _ in range(30):
            i = int(rng.integers(oracle.n_agents))
            x, y = rng.normal(size=oracle.dim), rng.normal(size=oracle.dim)
            lhs = np.linalg.norm(oracle.grad(i, x) - oracle.grad(i, y))
            assert lhs <= bounds[i] * np.linalg.norm(x - y) * (1 + 1e-9)

    def test_batch_grad_full_batch_matches(self, rng):
        oracle = small_logistic(alpha=0.2)
        x = rng.normal(size=oracle.dim)
        m0 = len(oracle.data.partition[0])
        g = oracle.batch_grad(0, x, m0, rng)
        assert np.allclose(g, oracle.grad(0, x), atol=1e-12)

    def test_needs_partition(self):
        data = make_synthetic_classification(10, 3, 0)
        with pytest.raises(PartitionError):
            LogisticNonconvex(data, 0.1)


class TestLocalization:
    def make_instance(self, rng, n=3, n_targets=2, sigma2=0.01):
        pos = rng.uniform(-1, 1, size=(n, 2))
        targets = rng.normal(0, 0.3, size=(n_targets, 2))
        noise = rng.normal(0, np.sqrt(sigma2), size=(n, n_targets))
        diff = targets[None] - pos[:, None]
        meas = (diff**2).sum(axis=2) + noise
        return LocalizationInstance(pos, targets, meas, noise, sigma2)

    def test_gradient_vanishes_at_agent_position(self, rng):
        inst = self.make_instance(rng)
        oracle = LocalizationObjective(inst)
        x = np.tile(inst.agent_positions[1], inst.n_targets)
        expected = 0.25 * float(inst.measurements[1] @ inst.measurements[1])
        assert oracle.value(1, x) == pytest.approx(expected, rel=1e-12)
        assert np.allclose(oracle.grad(1, x), 0.0, atol=1e-14)

    def test_zero_at_truth_when_noiseless(self, rng):
        inst = self.make_instance(rng, sigma2=0.0)
        oracle = LocalizationObjective(inst)
        x = inst.stacked_targets()
        for i in range(inst.n_agents):
            assert oracle.value(i, x) == pytest.approx(0.0, abs=1e-20)

    def test_gradient_matches_fd(self, rng):
        inst = self.make_instance(rng)
        oracle = LocalizationObjective(inst)
        for _ in range(20):
            i = int(rng.integers(inst.n_agents))
            x = rng.normal(size=oracle.dim)
            g = oracle.grad(i, x)
            g_fd = finite_difference_grad(lambda z: oracle.value(i, z), x)
            assert np.linalg.norm(g - g_fd) <= 1e-5 * max(1.0, np.linalg.norm(g_fd))

    def test_no_global_smoothness_hint(self, rng):
        oracle = LocalizationObjective(self.make_instance(rng))
        assert oracle.smoothness() is None

    def test_instance_json_roundtrip(self, rng):
        inst = self.make_instance(rng)
        back = LocalizationInstance.from_json(inst.to_json())
        assert np.array_equal(back.measurements, inst.measurements)
        assert back.sigma2 == inst.sigma2


class TestParseLibsvm:
    def test_basic_line(self, tmp_path):
        f = tmp_path / "tiny.libsvm"
        f.write_text("+1 3:0.5\n")
        data = parse_libsvm(f, n_features=4)
        assert np.array_equal(data.features, [[0.0, 0.0, 0.5, 0.0]])
        assert data.labels.tolist() == [1.0]

    def test_label_only_line(self, tmp_path):
        f = tmp_path / "tiny.libsvm"
        f.write_text("-1\n+1 1:2\n")
        data = parse_libsvm(f)
        assert np.array_equal(data.features, [[0.0], [2.0]])
        assert data.labels.tolist() == [-1.0, 1.0]

    def test_zero_label_maps_to_negative(self, tmp_path):
        f = tmp_path / "tiny.libsvm"
        f.write_text("0 1:1\n1 1:2\n")
        assert parse_libsvm(f).labels.tolist() == [-1.0, 1.0]

    def test_malformed_token_reports_location(self, tmp_path):
        f = tmp_path / "bad.libsvm"
        f.write_text("+1 1:0.5\n-1 2:oops\n")
        with pytest.raises(ParseError) as err:
            parse_libsvm(f)
        assert err.value.line == 2 and err.value.column == 2

    def test_label_domain_error(self, tmp_path):
        f = tmp_path / "bad.libsvm"
        f.write_text("2 1:0.5\n")
        with pytest.raises(LabelDomainError):
            parse_libsvm(f)

    @pytest.mark.skipif(not A9A_PATH.exists(), reason="a9a dataset not present")
    def test_a9a_shape(self):
        data = parse_libsvm(A9A_PATH, n_features=123)
        assert data.n_samples == 32561 and data.n_features == 123


class TestPartition:
    def test_even_split(self):
        data = make_synthetic_classification(10, 2, 0)
        part = partition_uniform(data, 2, seed=0)
        assert sorted(len(b) for b in part.partition) == [5, 5]

    def test_remainder_spread(self):
        data = make_synthetic_classification(7, 2, 0)
        part = partition_uniform(data, 3, seed=0)
        assert sorted(len(b) for b in part.partition) == [2, 2, 3]

    def test_a9a_sized_split(self):
        data = BinaryDataset(features=np.zeros((32561, 1)), labels=np.ones(32561))
        part = partition_uniform(data, 50, seed=4)
        sizes = {len(b) for b in part.partition}
        assert sizes == {651, 652}  # 32561 = 50*651 + 11

    def test_deterministic(self):
        data = make_synthetic_classification(40, 3, 2)
        a = partition_uniform(data, 4, seed=9)
        b = partition_uniform(data, 4, seed=9)
        for x, y in zip(a.partition, b.partition):
            assert np.array_equal(x, y)

    def test_too_many_agents(self):
        data = make_synthetic_classification(3, 2, 0)
        with pytest.raises(PartitionError):
            partition_uniform(data, 5, seed=0)

    def test_partition_must_cover(self):
        with pytest.raises(PartitionError):
            BinaryDataset(
                features=np.zeros((4, 1)),
                labels=np.ones(4),
                partition=(np.array([0, 1]), np.array([1, 2])),
            )


class TestGenerators:
    def test_paper_configuration(self):
        graph, inst = generate_localization_instance(50, 5, 0.01, seed=3, graph_radius=0.6)
        assert graph.n == 50 and inst.n_targets == 5
        assert inst.measurements.shape == (50, 5)

    def test_noiseless_measurements_exact(self):
        _, inst = generate_localization_instance(8, 2, 0.0, seed=5, graph_radius=1.2)
        diff = inst.true_targets[None] - inst.agent_positions[:, None]
        assert np.array_equal(inst.measurements, (diff**2).sum(axis=2))

    def test_seed_replay_bit_identical(self):
        g1, i1 = generate_localization_instance(12, 3, 0.01, seed=7, graph_radius=0.9)
        g2, i2 = generate_localization_instance(12, 3, 0.01, seed=7, graph_radius=0.9)
        assert g1.edges == g2.edges
        assert np.array_equal(i1.measurements, i2.measurements)
        assert np.array_equal(i1.noise, i2.noise)

    def test_synthetic_classification_labels(self):
        for style in ("gaussian", "sparse_scaled"):
            data = make_synthetic_classification(100, 6, 1, style=style)
            assert set(np.unique(data.labels)) <= {-1.0, 1.0}

    def test_estimate_smoothness_on_quadratic(self, rng):
        q = QuadraticConsensus(rng.normal(size=(4, 3)))
        est = estimate_smoothness(q, seed=0, safety=2.0)
        assert est == pytest.approx(2.0, rel=1e-6)  # ratio is exactly 1, doubled
