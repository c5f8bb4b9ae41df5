"""Benchmark objective oracles, data ingestion, and instance generators.

Each oracle exposes per-agent value/gradient callables.  Solvers work with
the unscaled stacked objective ``sum_i f_i(x_i)`` (each agent sees only its
own function); the ``1/N``-normalized mean appears only in reported metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    DataError,
    DimensionMismatchError,
    LabelDomainError,
    ParseError,
    PartitionError,
)
from .rng import DATA, DATA_PARTITION, NOISE, stream
from .topology import Graph, build_geometric

__all__ = [
    "ObjectiveOracle",
    "QuadraticConsensus",
    "LogisticNonconvex",
    "LocalizationObjective",
    "BinaryDataset",
    "LocalizationInstance",
    "parse_libsvm",
    "partition_uniform",
    "make_synthetic_classification",
    "generate_localization_instance",
    "estimate_smoothness",
]


class ObjectiveOracle:
    """Per-agent objective interface.

    Subclasses provide ``value(i, x)`` and ``grad(i, x)`` for agents
    ``i = 0..n_agents-1`` over decision vectors of length ``dim``.
    ``smoothness()`` returns per-agent Lipschitz constants of the gradients
    when they are known, else ``None``.  Oracles are immutable and
    reentrant; concurrent evaluation across agents is safe.
    """

    n_agents: int
    dim: int
    lower_bound: float | None = None

    def value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def smoothness(self) -> np.ndarray | None:
        return None

    # closed-form minimizer of f_i(x) + <y, x-x0> + ||x-x0||^2/(2 eta),
    # available only for oracles that implement it
    has_prox = False

    def prox(self, i: int, y: np.ndarray, x0: np.ndarray, eta: float) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form subproblem solution")

    has_batch_grad = False

    def batch_grad(
        self, i: int, x: np.ndarray, batch_size: int, rng: np.random.Generator
    ) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no mini-batch gradient")

    # stacked conveniences -------------------------------------------------

    def grad_stack(self, X: np.ndarray) -> np.ndarray:
        """Rows ``grad(i, X[i])`` for all agents (no 1/N scaling)."""
        return np.stack([self.grad(i, X[i]) for i in range(self.n_agents)])

    def value_total(self, X: np.ndarray) -> float:
        """Unscaled stacked objective ``sum_i f_i(x_i)``."""
        return float(sum(self.value(i, X[i]) for i in range(self.n_agents)))

    def value_mean(self, X: np.ndarray) -> float:
        """Mean objective ``(1/N) sum_i f_i(x_i)``."""
        return self.value_total(X) / self.n_agents

    def mean_value_at(self, x: np.ndarray) -> float:
        """Consensus objective ``(1/N) sum_i f_i(x)`` at one shared point."""
        return float(sum(self.value(i, x) for i in range(self.n_agents))) / self.n_agents

    def mean_grad_at(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the consensus objective, ``(1/N) sum_i grad_i(x)``."""
        g = np.zeros(self.dim)
        for i in range(self.n_agents):
            g += self.grad(i, x)
        return g / self.n_agents

    def _check_dims(self, X: np.ndarray) -> None:
        if X.shape != (self.n_agents, self.dim):
            raise DimensionMismatchError(
                f"expected iterate stack of shape {(self.n_agents, self.dim)}, got {X.shape}"
            )


class QuadraticConsensus(ObjectiveOracle):
    """Closed-form validation problem ``f_i(x) = ||x - a_i||^2 / 2``.

    The consensus minimizer is the target mean; every gradient is 1-Lipschitz
    and the local subproblem has an explicit solution, which makes this the
    oracle problem for solver correctness tests.
    """

    has_prox = True

    def __init__(self, targets: np.ndarray) -> None:
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        self.targets = targets
        self.n_agents, self.dim = targets.shape
        self.lower_bound = 0.0

    def value(self, i: int, x: np.ndarray) -> float:
        d = x - self.targets[i]
        return 0.5 * float(d @ d)

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return x - self.targets[i]

    def grad_stack(self, X: np.ndarray) -> np.ndarray:
        self._check_dims(X)
        return X - self.targets

    def smoothness(self) -> np.ndarray:
        return np.ones(self.n_agents)

    def prox(self, i: int, y: np.ndarray, x0: np.ndarray, eta: float) -> np.ndarray:
        return (eta * self.targets[i] + x0 - eta * y) / (1.0 + eta)

    @property
    def x_star(self) -> np.ndarray:
        return self.targets.mean(axis=0)


@dataclass(frozen=True)
class BinaryDataset:
    """Dense binary-classification dataset with an optional agent partition.

    ``labels`` live in {-1,+1}; ``partition`` is a tuple of disjoint index
    arrays covering every sample exactly once.
    """

    features: np.ndarray
    labels: np.ndarray
    partition: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=float)
        if feats.ndim != 2 or labs.ndim != 1 or feats.shape[0] != labs.shape[0]:
            raise DimensionMismatchError(
                f"features {feats.shape} and labels {labs.shape} do not align"
            )
        if not np.all(np.isin(labs, (-1.0, 1.0))):
            bad = labs[~np.isin(labs, (-1.0, 1.0))][0]
            raise LabelDomainError(f"labels must be -1 or +1, found {bad}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        if self.partition is not None:
            part = tuple(np.asarray(idx, dtype=int) for idx in self.partition)
            if any(idx.size == 0 for idx in part):
                raise PartitionError("every agent needs at least one sample")
            allidx = np.concatenate(part)
            if len(allidx) != self.n_samples or len(np.unique(allidx)) != self.n_samples:
                raise PartitionError("partition must cover all sample indices exactly once")
            object.__setattr__(self, "partition", part)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def agent_slice(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        if self.partition is None:
            raise PartitionError("dataset has no agent partition")
        idx = self.partition[i]
        return self.features[idx], self.labels[idx]


class LogisticNonconvex(ObjectiveOracle):
    """Logistic loss with the bounded non-convex sparsity regularizer.

    Agent i holds a slice (A_i, b_i) of the dataset and minimizes

        f_i(x) = (1/m_i) sum_j log(1 + exp(-b_j <x, a_j>))
                 + alpha * sum_d x_d^2 / (1 + x_d^2).

    ``alpha = 0`` recovers the convex logistic loss.  The gradient is
    ``max sigma_max(A_i)^2/(4 m_i) + 2 alpha`` Lipschitz per agent (the
    regularizer curvature peaks at the origin with value ``2 alpha``).
    """

    has_batch_grad = True

    def __init__(self, data: BinaryDataset, alpha: float) -> None:
        if data.partition is None:
            raise PartitionError("logistic oracle needs a partitioned dataset")
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        self.data = data
        self.alpha = float(alpha)
        self.n_agents = len(data.partition)
        self.dim = data.n_features
        self.lower_bound = 0.0
        self._slices = [data.agent_slice(i) for i in range(self.n_agents)]
        self._smoothness: np.ndarray | None = None

    def value(self, i: int, x: np.ndarray) -> float:
        feats, labs = self._slices[i]
        margins = labs * (feats @ x)
        loss = float(np.logaddexp(0.0, -margins).mean())
        xsq = x * x
        reg = self.alpha * float((xsq / (1.0 + xsq)).sum())
        return loss + reg

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        feats, labs = self._slices[i]
        margins = labs * (feats @ x)
        coef = -labs * expit(-margins)
        g = feats.T @ coef / len(labs)
        g += 2.0 * self.alpha * x / (1.0 + x * x) ** 2
        return g

    def batch_grad(
        self, i: int, x: np.ndarray, batch_size: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Mini-batch gradient; indices drawn without replacement per call."""
        feats, labs = self._slices[i]
        m = len(labs)
        take = min(batch_size, m)
        idx = rng.choice(m, size=take, replace=False)
        margins = labs[idx] * (feats[idx] @ x)
        coef = -labs[idx] * expit(-margins)
        g = feats[idx].T @ coef / take
        g += 2.0 * self.alpha * x / (1.0 + x * x) ** 2
        return g

    def smoothness(self) -> np.ndarray:
        if self._smoothness is None:
            out = np.empty(self.n_agents)
            for i, (feats, _) in enumerate(self._slices):
                smax = np.linalg.norm(feats, 2)
                out[i] = smax**2 / (4.0 * len(feats)) + 2.0 * self.alpha
            self._smoothness = out
        return self._smoothness


@dataclass(frozen=True)
class LocalizationInstance:
    """Multi-target localization data: agent positions, targets, measurements.

    ``measurements[i, t]`` is the squared agent-target distance plus stored
    Gaussian noise ``noise[i, t]``, kept so tests can replay the generation.
    """

    agent_positions: np.ndarray  # (N, 2)
    true_targets: np.ndarray  # (N_T, 2)
    measurements: np.ndarray  # (N, N_T)
    noise: np.ndarray  # (N, N_T)
    sigma2: float

    def __post_init__(self) -> None:
        pos = np.asarray(self.agent_positions, dtype=float)
        tgt = np.asarray(self.true_targets, dtype=float)
        meas = np.asarray(self.measurements, dtype=float)
        noise = np.asarray(self.noise, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or tgt.ndim != 2 or tgt.shape[1] != 2:
            raise DimensionMismatchError("positions and targets must be (n, 2) arrays")
        if meas.shape != (pos.shape[0], tgt.shape[0]) or noise.shape != meas.shape:
            raise DimensionMismatchError("measurements must be (n_agents, n_targets)")
        for name, arr in (
            ("agent_positions", pos),
            ("true_targets", tgt),
            ("measurements", meas),
            ("noise", noise),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_agents(self) -> int:
        return self.agent_positions.shape[0]

    @property
    def n_targets(self) -> int:
        return self.true_targets.shape[0]

    def stacked_targets(self) -> np.ndarray:
        """True targets flattened to one decision vector of length 2*N_T."""
        return self.true_targets.reshape(-1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "agent_positions": self.agent_positions.tolist(),
                "true_targets": self.true_targets.tolist(),
                "measurements": self.measurements.tolist(),
                "noise": self.noise.tolist(),
                "sigma2": self.sigma2,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LocalizationInstance":
        doc = json.loads(text)
        return cls(
            agent_positions=np.asarray(doc["agent_positions"]),
            true_targets=np.asarray(doc["true_targets"]),
            measurements=np.asarray(doc["measurements"]),
            noise=np.asarray(doc["noise"]),
            sigma2=float(doc["sigma2"]),
        )


class LocalizationObjective(ObjectiveOracle):
    """Quartic multi-target localization objective.

    Agent i at position w_i observes noisy squared distances xi_{i,t} and
    minimizes, over the stacked targets x = (x[1], ..., x[N_T]),

        f_i(x) = (1/4) sum_t (xi_{i,t} - ||x[t] - w_i||^2)^2.

    The objective is smooth but not globally gradient-Lipschitz, so no
    smoothness hint is provided; callers should estimate one on the region
    of interest (see ``estimate_smoothness``).
    """

    def __init__(self, inst: LocalizationInstance) -> None:
        self.instance = inst
        self.n_agents = inst.n_agents
        self.dim = 2 * inst.n_targets
        self.lower_bound = 0.0

    def _residuals(self, i: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = x.reshape(self.instance.n_targets, 2)
        diff = pts - self.instance.agent_positions[i]
        resid = self.instance.measurements[i] - (diff * diff).sum(axis=1)
        return resid, diff

    def value(self, i: int, x: np.ndarray) -> float:
        resid, _ = self._residuals(i, x)
        return 0.25 * float(resid @ resid)

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        resid, diff = self._residuals(i, x)
        return (-resid[:, None] * diff).reshape(-1)


def parse_libsvm(path, n_features: int | None = None) -> BinaryDataset:
    """Read a LIBSVM-format text file into a dense dataset.

    Lines look like ``label idx:val idx:val ...`` with 1-based feature
    indices.  Labels in {-1,+1,0,1} are mapped onto {-1,+1} (0 -> -1);
    anything else raises.  The feature dimension is the maximum index seen
    unless ``n_features`` fixes it.
    """
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    max_idx = 0
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read LIBSVM file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                lab = float(tokens[0])
            except ValueError:
                raise ParseError(f"unparseable label {tokens[0]!r}", line=lineno, column=1)
            if lab in (1.0, -1.0):
                labels.append(lab)
            elif lab == 0.0:
                labels.append(-1.0)
            else:
                raise LabelDomainError(f"label {lab} outside {{-1,+1,0,1}}", line=lineno)
            entries: dict[int, float] = {}
            for col, tok in enumerate(tokens[1:], start=2):
                if ":" not in tok:
                    raise ParseError(f"expected idx:val, got {tok!r}", line=lineno, column=col)
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"unparseable token {tok!r}", line=lineno, column=col)
                if idx < 1:
                    raise ParseError(f"feature index {idx} < 1", line=lineno, column=col)
                entries[idx] = val
                max_idx = max(max_idx, idx)
            rows.append(entries)
    if n_features is None:
        n_features = max_idx
    elif max_idx > n_features:
        raise ParseError(f"feature index {max_idx} exceeds declared dimension {n_features}")
    feats = np.zeros((len(rows), n_features))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            feats[r, idx - 1] = val
    return BinaryDataset(features=feats, labels=np.asarray(labels))


def partition_uniform(data: BinaryDataset, n_agents: int, seed: int) -> BinaryDataset:
    """Random near-equal split of samples across agents.

    Samples are permuted by the ``data-partition`` stream and cut into
    contiguous blocks whose sizes differ by at most one.
    """
    m = data.n_samples
    if n_agents < 1 or n_agents > m:
        raise PartitionError(f"cannot split {m} samples across {n_agents} agents")
    perm = stream(seed, DATA_PARTITION).permutation(m)
    base, extra = divmod(m, n_agents)
    blocks = []
    start = 0
    for i in range(n_agents):
        size = base + (1 if i < extra else 0)
        blocks.append(perm[start : start + size])
        start += size
    return BinaryDataset(features=data.features, labels=data.labels, partition=tuple(blocks))


def make_synthetic_classification(
    m: int, p: int, seed: int, margin_noise: float = 0.5, style: str = "gaussian"
) -> BinaryDataset:
    """Synthetic binary classification data for desk-scale runs.

    ``gaussian``: standard-normal features, labels from a noisy linear
    margin — an easy, well-conditioned instance.  ``sparse_scaled``: sparse
    binary features with log-spaced column frequencies (some so rare that
    most agent slices never see them) and an 80x column-scale spread —
    a deliberately ill-conditioned, census-data-like instance on which
    one-shot gradient baselines stall.
    """
    rng = stream(seed, DATA)
    if style == "gaussian":
        feats = rng.standard_normal((m, p))
        w_true = rng.standard_normal(p)
        margins = feats @ w_true / np.sqrt(p) + margin_noise * rng.standard_normal(m)
    elif style == "sparse_scaled":
        n_dense = max(2, p // 5)
        freqs = np.concatenate(
            [np.full(n_dense, 0.4), np.logspace(np.log10(0.05), np.log10(0.002), p - n_dense)]
        )
        feats = (rng.random((m, p)) < freqs).astype(float)
        scales = np.logspace(np.log10(0.2), np.log10(16.0), p)
        rng.shuffle(scales)
        feats *= scales
        w_true = rng.standard_normal(p) * 4.0
        w_true[n_dense:] *= 3.0
        margins = feats @ w_true + margin_noise * rng.standard_normal(m)
    else:
        raise ValueError(f"unknown synthetic style {style!r}")
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    return BinaryDataset(features=feats, labels=labels)


def generate_localization_instance(
    n: int, n_targets: int, sigma2: float, seed: int, graph_radius: float
) -> tuple[Graph, LocalizationInstance]:
    """Sample a localization problem and its communication graph.

    Agent positions come from a connected geometric graph on [-1,1]^2;
    target coordinates are N(0, 0.1); measurements are squared distances
    plus N(0, sigma2) noise.  Fully reproducible from ``seed``.
    """
    if n_targets < 1:
        raise ValueError(f"need at least one target, got {n_targets}")
    if sigma2 < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma2}")
    graph, positions = build_geometric(n, graph_radius, seed)
    targets = stream(seed, DATA).normal(0.0, np.sqrt(0.1), size=(n_targets, 2))
    noise = stream(seed, NOISE).normal(0.0, np.sqrt(sigma2), size=(n, n_targets))
    diff = targets[None, :, :] - positions[:, None, :]
    sqdist = (diff * diff).sum(axis=2)
    inst = LocalizationInstance(
        agent_positions=positions,
        true_targets=targets,
        measurements=sqdist + noise,
        noise=noise,
        sigma2=float(sigma2),
    )
    return graph, inst


def estimate_smoothness(
    oracle: ObjectiveOracle,
    seed: int,
    box_scale: float = 1.0,
    n_pairs: int = 50,
    safety: float = 2.0,
) -> float:
    """Sampled gradient-Lipschitz estimate for oracles without a global bound.

    Draws point pairs from N(0, box_scale^2 I) and returns ``safety`` times
    the largest observed ratio ||g(x)-g(y)|| / ||x-y|| over all agents.
    """
    rng = stream(seed, "smoothness-probe")
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.normal(0.0, box_scale, size=oracle.dim)
        y = rng.normal(0.0, box_scale, size=oracle.dim)
        gap = np.linalg.norm(x - y)
        if gap < 1e-12:
            continue
        for i in range(oracle.n_agents):
            ratio = np.linalg.norm(oracle.grad(i, x) - oracle.grad(i, y)) / gap
            worst = max(worst, float(ratio))
    if worst == 0.0:
        worst = 1.0
    return safety * worst
