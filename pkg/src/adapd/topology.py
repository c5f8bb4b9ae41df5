"""Agent graphs and gossip mixing matrices.

A mixing matrix here is a dense symmetric matrix W that respects the graph
sparsity, has every row summing to one, a simple eigenvalue 1 with the
all-ones eigenvector, and all remaining eigenvalues inside (-1, 1).  One
multiplication by W models one synchronous neighbour-exchange round.  The
connectivity of the network is summarized by the spectral gap

    rho = || W - (1/N) e e^T ||_2 = max(|lambda_2|, |lambda_N|),

which every constructor computes once from a cached eigendecomposition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    InvalidParameterError,
    TopologyError,
    TopologyGenerationError,
)
from .rng import TOPOLOGY, stream

__all__ = [
    "Graph",
    "MixingMatrix",
    "ValidationReport",
    "ring_graph",
    "build_ring",
    "build_erdos_renyi",
    "build_geometric",
    "laplacian_weights",
    "metropolis_weights",
    "averaging_matrix",
    "mixing_from_array",
    "spectral_gap",
    "power_matrix",
    "validate_mixing",
    "graph_to_json",
    "graph_from_json",
    "mixing_to_json",
    "CONNECTIVITY_RETRY_BUDGET",
]

# resamples allowed before random generators give up on connectivity
CONNECTIVITY_RETRY_BUDGET = 100

# tolerances for the mixing-matrix contract (see MixingMatrix docstring)
ROW_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12
EIG_RANGE_TOL = 1e-10
SIMPLE_EIG_TOL = 1e-12


def _canonical_edges(edges) -> tuple[tuple[int, int], ...]:
    out = []
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise TopologyError(f"self-loop on agent {i} is not allowed")
        out.append((min(i, j), max(i, j)))
    uniq = sorted(set(out))
    if len(uniq) != len(out):
        raise TopologyError("duplicate edges in edge list")
    return tuple(uniq)


@dataclass(frozen=True)
class Graph:
    """Undirected, connected agent network.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j``; neighbour
    lists are precomputed.  Instances are immutable and safe to share
    across parallel trial runners.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise TopologyError(f"need at least one agent, got n={self.n}")
        edges = _canonical_edges(self.edges)
        object.__setattr__(self, "edges", edges)
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i},{j}) out of range for n={self.n}")
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(v)) for v in nbrs))
        if not self._connected():
            raise TopologyError("graph is not connected")

    def _connected(self) -> bool:
        seen = [False] * self.n
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in self.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.n

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(v) for v in self.neighbors], dtype=int)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees.astype(float)) - self.adjacency()


@dataclass(frozen=True)
class MixingMatrix:
    """Dense symmetric mixing matrix with cached spectral data.

    ``rho`` is the spectral gap; for matrix powers it is set analytically to
    ``rho(W)**R``.  The eigendecomposition is computed once at construction
    and reused by validation, the spectral gap, and the symmetric square
    root of ``I - W`` needed by diagnostics.
    """

    w: np.ndarray
    rho: float
    source: str
    graph: Graph | None = None
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    _eigenvectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatchError(f"mixing matrix must be square, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        vals, vecs = np.linalg.eigh(w)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "_eigenvectors", vecs)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def sqrt_i_minus_w(self) -> np.ndarray:
        """Symmetric PSD square root of ``I - W``.

        Eigenvalues of ``I - W`` that are negative by at most 1e-12 are
        clamped to zero; anything more negative violates the spectral
        contract and raises.
        """
        gap = 1.0 - self.eigenvalues
        if np.any(gap < -1e-12):
            raise DegenerateSpectrumError(
                f"eigenvalue {self.eigenvalues.max():.16g} exceeds 1; I - W is not PSD"
            )
        root = np.sqrt(np.clip(gap, 0.0, None))
        v = self._eigenvectors
        return (v * root) @ v.T


def _measured_rho(eigenvalues: np.ndarray) -> float:
    # eigenvalues ascending; drop the consensus eigenvalue (largest);
    # rounding-level gaps snap to exactly zero (exact averaging matrices)
    if eigenvalues.size == 1:
        return 0.0
    rho = float(max(abs(eigenvalues[-2]), abs(eigenvalues[0])))
    return 0.0 if rho < 1e-14 else rho


def mixing_from_array(
    w: np.ndarray,
    graph: Graph | None = None,
    source: str = "custom",
    rho: float | None = None,
) -> MixingMatrix:
    """Wrap an explicit weight matrix, checking the mixing-matrix contract."""
    w = np.asarray(w, dtype=float)
    m = MixingMatrix(w=w, rho=0.0, source=source, graph=graph)
    report = validate_mixing(m, graph)
    if not report.ok:
        raise TopologyError(f"matrix violates the mixing contract: {report.failures()}")
    measured = _measured_rho(m.eigenvalues)
    object.__setattr__(m, "rho", measured if rho is None else float(rho))
    return m


def ring_graph(n: int) -> Graph:
    """Cycle graph on ``n >= 3`` agents."""
    if n < 3:
        raise TopologyError(f"a ring needs n >= 3 agents, got {n}")
    return Graph(n=n, edges=tuple((i, (i + 1) % n) for i in range(n)))


def build_ring(n: int, self_weight: float = 0.5) -> MixingMatrix:
    """Circulant mixing matrix on the cycle graph.

    Each agent keeps ``self_weight`` and gives each ring neighbour
    ``(1 - self_weight) / 2``.
    """
    if not 0.0 < self_weight < 1.0:
        raise InvalidParameterError(f"self_weight must be in (0,1), got {self_weight}")
    g = ring_graph(n)
    w = np.eye(n) * self_weight
    side = (1.0 - self_weight) / 2.0
    for i in range(n):
        w[i, (i + 1) % n] = side
        w[i, (i - 1) % n] = side
    return mixing_from_array(w, graph=g, source="ring")


def _er_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    # pairs scanned in lexicographic (i < j) order; one uniform draw per pair
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    draws = rng.random(len(pairs))
    return [pair for pair, u in zip(pairs, draws) if u < p]


def build_erdos_renyi(n: int, p: float, rng_seed: int) -> Graph:
    """Erdos-Renyi graph, resampled until connected.

    Each unordered pair is included independently with probability ``p``;
    draws come from the ``topology`` stream of ``rng_seed`` in lexicographic
    pair order (documented so tests can replay the stream).
    """
    if n < 2:
        raise TopologyError(f"need n >= 2 agents, got {n}")
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"connection probability must be in (0,1], got {p}")
    rng = stream(rng_seed, TOPOLOGY)
    for attempt in range(1, CONNECTIVITY_RETRY_BUDGET + 1):
        edges = _er_edges(n, p, rng)
        try:
            return Graph(n=n, edges=tuple(edges))
        except TopologyError:
            continue
    raise TopologyGenerationError(
        f"no connected Erdos-Renyi graph (n={n}, p={p}) in "
        f"{CONNECTIVITY_RETRY_BUDGET} attempts",
        attempts=CONNECTIVITY_RETRY_BUDGET,
    )


def build_geometric(n: int, radius: float, rng_seed: int) -> tuple[Graph, np.ndarray]:
    """Random geometric graph on the [-1,1]^2 square.

    Agent positions are drawn uniformly; agents within Euclidean distance
    ``radius`` are connected.  Positions are resampled until the graph is
    connected and returned for use as agent locations.
    """
    if n < 2:
        raise TopologyError(f"need n >= 2 agents, got {n}")
    if radius <= 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    rng = stream(rng_seed, TOPOLOGY)
    for attempt in range(1, CONNECTIVITY_RETRY_BUDGET + 1):
        pos = rng.uniform(-1.0, 1.0, size=(n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if dist[i, j] <= radius]
        try:
            return Graph(n=n, edges=tuple(edges)), pos
        except TopologyError:
            continue
    raise TopologyGenerationError(
        f"no connected geometric graph (n={n}, radius={radius}) in "
        f"{CONNECTIVITY_RETRY_BUDGET} attempts",
        attempts=CONNECTIVITY_RETRY_BUDGET,
    )


def laplacian_weights(g: Graph, tau: float | None = None) -> MixingMatrix:
    """Laplacian-based constant edge weights ``W = I - L/tau``.

    ``tau`` must exceed half the largest Laplacian eigenvalue (equality is
    rejected within 1e-12).  The default is the Gershgorin-safe
    ``max_i |N_i| + 1``.
    """
    lap = g.laplacian()
    if tau is None:
        tau = float(g.degrees.max()) + 1.0
    lam_max = float(np.linalg.eigvalsh(lap)[-1])
    bound = 0.5 * lam_max
    if tau <= bound + 1e-12 * max(1.0, bound):
        raise InvalidParameterError(
            f"tau={tau} must exceed lambda_1(L)/2 = {bound:.12g} strictly"
        )
    w = np.eye(g.n) - lap / tau
    w = 0.5 * (w + w.T)
    return mixing_from_array(w, graph=g, source="laplacian")


def metropolis_weights(g: Graph, eps: float = 1.0) -> MixingMatrix:
    """Metropolis constant edge weights.

    Edge (i,j) gets ``1 / (max(|N_i|, |N_j|) + eps)``; the diagonal absorbs
    the remainder so rows sum to one exactly.
    """
    if eps <= 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    deg = g.degrees
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (max(deg[i], deg[j]) + eps)
    for i in range(g.n):
        w[i, i] = 1.0 - w[i].sum()
    return mixing_from_array(w, graph=g, source="metropolis")


def averaging_matrix(n: int) -> MixingMatrix:
    """Centralized averaging matrix ``(1/N) e e^T`` (rho = 0)."""
    if n < 1:
        raise TopologyError(f"need n >= 1, got {n}")
    g = Graph(n=n, edges=tuple((i, j) for i in range(n) for j in range(i + 1, n)))
    return mixing_from_array(np.full((n, n), 1.0 / n), graph=g, source="averaging")


def spectral_gap(w: MixingMatrix | np.ndarray) -> float:
    """Spectral gap ``max(|lambda_2|, |lambda_N|)`` of a mixing matrix."""
    if isinstance(w, MixingMatrix):
        vals = w.eigenvalues
    else:
        vals = np.linalg.eigvalsh(np.asarray(w, dtype=float))
    rho = _measured_rho(vals)
    if rho >= 1.0 - 1e-12:
        raise DegenerateSpectrumError(
            f"spectral gap {rho} ~ 1: disconnected or periodic structure"
        )
    return rho


def power_matrix(w: MixingMatrix, R: int) -> MixingMatrix:
    """Dense matrix power ``W^R`` with ``rho = rho(W)**R``.

    One application of the result stands for ``R`` neighbour exchanges;
    communication accounting must charge ``R`` per multiply.
    """
    if R < 1:
        raise InvalidParameterError(f"power R must be >= 1, got {R}")
    if R == 1:
        return w
    wr = np.linalg.matrix_power(w.w, R)
    wr = 0.5 * (wr + wr.T)
    m = MixingMatrix(w=wr, rho=w.rho**R, source=f"power({R})", graph=None)
    return m


@dataclass
class ClauseResult:
    passed: bool
    detail: str
    residual: float | None = None


@dataclass
class ValidationReport:
    """Per-clause verdicts for the four mixing-matrix conditions."""

    decentralized: ClauseResult
    symmetric: ClauseResult
    null_space: ClauseResult
    spectral: ClauseResult

    @property
    def ok(self) -> bool:
        return all(
            c.passed for c in (self.decentralized, self.symmetric, self.null_space, self.spectral)
        )

    def failures(self) -> list[str]:
        return [
            f"{name}: {c.detail}"
            for name, c in (
                ("decentralized", self.decentralized),
                ("symmetric", self.symmetric),
                ("null_space", self.null_space),
                ("spectral", self.spectral),
            )
            if not c.passed
        ]

    def as_dict(self) -> dict:
        return {
            name: {"passed": c.passed, "detail": c.detail, "residual": c.residual}
            for name, c in (
                ("decentralized", self.decentralized),
                ("symmetric", self.symmetric),
                ("null_space", self.null_space),
                ("spectral", self.spectral),
            )
        }


def validate_mixing(w: MixingMatrix, g: Graph | None = None) -> ValidationReport:
    """Check the four mixing-matrix clauses, reporting measured residuals.

    The sparsity-pattern clause is skipped (reported as passed with a note)
    when no graph is supplied, e.g. for matrix powers whose fill-in is
    intentional.
    """
    mat = w.w
    n = mat.shape[0]

    if g is not None:
        if g.n != n:
            raise DimensionMismatchError(f"graph has {g.n} agents, matrix is {n}x{n}")
        adj = g.adjacency().astype(bool)
        off = ~np.eye(n, dtype=bool)
        missing = np.argwhere(adj & (mat <= 0.0))
        spurious = np.argwhere((~adj) & off & (mat != 0.0))
        passed = missing.size == 0 and spurious.size == 0
        detail = "weights positive on edges, zero off the graph"
        if not passed:
            detail = (
                f"{len(missing)} edges with non-positive weight, "
                f"{len(spurious)} non-edges with non-zero weight"
            )
        decentralized = ClauseResult(passed, detail, residual=float(len(missing) + len(spurious)))
    else:
        decentralized = ClauseResult(True, "no graph supplied; pattern not checked", None)

    sym_dev = float(np.abs(mat - mat.T).max()) if n > 0 else 0.0
    symmetric = ClauseResult(sym_dev <= SYMMETRY_TOL, f"max |W - W^T| = {sym_dev:.3e}", sym_dev)

    vals = w.eigenvalues
    row_dev = float(np.abs(mat.sum(axis=1) - 1.0).max())
    mult_one = int(np.sum(vals >= 1.0 - SIMPLE_EIG_TOL))
    null_ok = row_dev <= ROW_SUM_TOL and mult_one == 1
    null_space = ClauseResult(
        null_ok,
        f"max row-sum deviation {row_dev:.3e}; eigenvalue-1 multiplicity {mult_one}",
        row_dev,
    )

    lo, hi = float(vals[0]), float(vals[-1])
    spec_ok = lo > -1.0 + EIG_RANGE_TOL and hi <= 1.0 + EIG_RANGE_TOL
    spectral = ClauseResult(
        spec_ok, f"eigenvalues in [{lo:.12g}, {hi:.12g}]", max(0.0, hi - 1.0, -1.0 - lo)
    )

    return ValidationReport(decentralized, symmetric, null_space, spectral)


def graph_to_json(g: Graph, positions: np.ndarray | None = None) -> str:
    """JSON descriptor of a graph (agent count, edge list, optional positions)."""
    doc: dict = {"n_agents": g.n, "edges": [list(e) for e in g.edges]}
    if positions is not None:
        doc["positions"] = np.asarray(positions).tolist()
    return json.dumps(doc)


def graph_from_json(text: str) -> tuple[Graph, np.ndarray | None]:
    doc = json.loads(text)
    g = Graph(n=int(doc["n_agents"]), edges=tuple(tuple(e) for e in doc["edges"]))
    pos = np.asarray(doc["positions"]) if "positions" in doc else None
    return g, pos


def mixing_to_json(w: MixingMatrix) -> str:
    """JSON descriptor: agent count, non-zero weight triples, rho, source."""
    mat = w.w
    triples = [
        [int(i), int(j), float(mat[i, j])]
        for i in range(w.n)
        for j in range(i, w.n)
        if mat[i, j] != 0.0
    ]
    doc = {
        "n_agents": w.n,
        "weights": triples,
        "rho": w.rho,
        "source": w.source,
    }
    if w.graph is not None:
        doc["edges"] = [list(e) for e in w.graph.edges]
    return json.dumps(doc)
