"""Experiment orchestration: seeded trials, budgets, summaries, grid search."""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..diagnostics import MetricsRecorder, TraceRecord, write_trace_csv, write_trace_jsonl
from ..errors import AdapdError, ConfigError, DataError, GridExhaustedError
from ..problems import (
    LocalizationObjective,
    LogisticNonconvex,
    QuadraticConsensus,
    estimate_smoothness,
    generate_localization_instance,
    make_synthetic_classification,
    parse_libsvm,
    partition_uniform,
)
from ..rng import DATA, INITIALIZATION, stream
from ..solvers import default_mc_degree, make_solver
from ..topology import (
    Graph,
    MixingMatrix,
    averaging_matrix,
    build_erdos_renyi,
    build_geometric,
    build_ring,
    graph_to_json,
    laplacian_weights,
    metropolis_weights,
    mixing_to_json,
    validate_mixing,
)
from .config import ExperimentConfig, dumps_toml

__all__ = ["TrialResult", "RunSummary", "run_experiment", "grid_search", "build_trial", "Z95"]

# 97.5% normal quantile used for 95% confidence half-widths; the plotting
# package pins the same constant and cross-checks against summary files
Z95 = 1.959963984540054


@dataclass
class TrialComponents:
    graph: Graph
    mixing: MixingMatrix | None
    problem: object
    solver: object
    recorder: MetricsRecorder
    instance: object | None = None
    positions: np.ndarray | None = None


@dataclass
class TrialResult:
    trial: int
    seed: int
    records: list[TraceRecord] | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.records is not None


@dataclass
class RunSummary:
    run_dir: Path
    n_trials: int
    failed: list[dict]
    aligned_by: str
    final: dict[str, dict[str, float]]

    @property
    def ok(self) -> bool:
        return not self.failed


def _weights_from_graph(g: Graph, spec) -> MixingMatrix:
    if spec.weights == "metropolis":
        return metropolis_weights(g, eps=spec.eps)
    tau = spec.tau if spec.tau > 0 else None
    return laplacian_weights(g, tau=tau)


def build_topology(cfg: ExperimentConfig, seed: int) -> tuple[Graph, MixingMatrix, np.ndarray | None]:
    spec = cfg.topology
    if spec.kind == "ring":
        w = build_ring(spec.n, spec.self_weight)
        return w.graph, w, None
    if spec.kind == "averaging":
        w = averaging_matrix(spec.n)
        return w.graph, w, None
    if spec.kind == "erdos_renyi":
        g = build_erdos_renyi(spec.n, spec.p, seed)
        return g, _weights_from_graph(g, spec), None
    g, pos = build_geometric(spec.n, spec.radius, seed)
    return g, _weights_from_graph(g, spec), pos


def build_trial(cfg: ExperimentConfig, seed: int) -> TrialComponents:
    """Construct topology, problem, solver, and recorder for one trial."""
    pspec, aspec = cfg.problem, cfg.algorithm
    instance = None
    if pspec.kind == "localization":
        graph, instance = generate_localization_instance(
            cfg.topology.n, pspec.n_targets, pspec.sigma2, seed, cfg.topology.radius
        )
        mixing = _weights_from_graph(graph, cfg.topology)
        positions = instance.agent_positions
        problem = LocalizationObjective(instance)
    else:
        graph, mixing, positions = build_topology(cfg, seed)
        n = graph.n
        if pspec.kind == "quadratic":
            targets = stream(seed, DATA).normal(0.0, pspec.target_scale, size=(n, pspec.dim))
            problem = QuadraticConsensus(targets)
        elif pspec.kind == "logistic_synthetic":
            data = make_synthetic_classification(
                pspec.m, pspec.dim, seed, pspec.margin_noise, style=pspec.style
            )
            problem = LogisticNonconvex(partition_uniform(data, n, seed), pspec.alpha)
        else:  # logistic_libsvm
            data = parse_libsvm(pspec.path, n_features=pspec.n_features or None)
            problem = LogisticNonconvex(partition_uniform(data, n, seed), pspec.alpha)

    l_hat: float | None
    if aspec.l_hat > 0:
        l_hat = aspec.l_hat
    elif aspec.l_hat < 0 or (problem.smoothness() is None and aspec.kind != "dgd"):
        l_hat = estimate_smoothness(problem, seed, box_scale=cfg.init.scale)
    else:
        l_hat = None

    degree = aspec.cheby_degree if aspec.cheby_degree >= 1 else default_mc_degree(mixing.rho)
    solver_cfg = aspec.solver_config(seed, l_hat).with_(cheby_degree=degree)

    if cfg.init.kind == "zeros":
        x_start = np.zeros((graph.n, problem.dim))
    else:
        x_start = cfg.init.scale * stream(seed, INITIALIZATION).standard_normal(
            (graph.n, problem.dim)
        )

    solver = make_solver(aspec.kind, problem, mixing, solver_cfg, graph=graph, x_start=x_start)

    og_smoothness = l_hat
    if og_smoothness is None and problem.smoothness() is not None:
        og_smoothness = float(problem.smoothness().max())
    recorder = MetricsRecorder(
        problem,
        mixing=mixing,
        eta=aspec.eta,
        lyapunov=cfg.metrics.lyapunov or None,
        dual_variant=cfg.metrics.dual_residual or None,
        localization=instance,
        smoothness=og_smoothness,
    )
    return TrialComponents(
        graph=graph,
        mixing=mixing,
        problem=problem,
        solver=solver,
        recorder=recorder,
        instance=instance,
        positions=positions,
    )


def run_trial(cfg: ExperimentConfig, seed: int) -> tuple[list[TraceRecord], TrialComponents]:
    """Run one seeded trial to budget exhaustion; returns its trace."""
    parts = build_trial(cfg, seed)
    solver, recorder = parts.solver, parts.recorder
    budget = cfg.budget
    timing = cfg.metrics.record_timing
    records = [recorder.record(solver, 0.0)]
    while True:
        state = solver.state
        if budget.kind == "communications":
            if state.comm_count + solver.next_step_cost() > budget.limit:
                break
        elif budget.kind == "iterations":
            if state.k >= budget.limit:
                break
        else:  # gradients
            if state.grad_count >= budget.limit:
                break
        t0 = time.perf_counter() if timing else 0.0
        solver.step()
        dt = time.perf_counter() - t0 if timing else 0.0
        records.append(recorder.record(solver, dt))
    return records, parts


def _trial_task(args: tuple[ExperimentConfig, int, int]) -> TrialResult:
    cfg, trial, seed = args
    try:
        records, _ = run_trial(cfg, seed)
        return TrialResult(trial=trial, seed=seed, records=records)
    except AdapdError as exc:
        return TrialResult(trial=trial, seed=seed, records=None, error=f"{type(exc).__name__}: {exc}")


def _aggregate(results: list[TrialResult]) -> tuple[str, dict]:
    """Mean and 95% CI half-width per metric at matched communication counts."""
    done = [r for r in results if r.ok]
    if not done:
        return "none", {}
    lengths = [len(r.records) for r in done]
    nrows = min(lengths)
    comms0 = [rec.comms for rec in done[0].records[:nrows]]
    aligned = all(
        [rec.comms for rec in r.records[:nrows]] == comms0 for r in done
    ) and len(set(lengths)) == 1
    aligned_by = "communications" if aligned else "iteration"

    metric_names = ["stationarity", "consensus_err", "mean_grad_norm2", "objective_F", "objective_fbar"]
    extra = sorted({name for r in done for rec in r.records for name in rec.extras})
    metrics: dict[str, dict] = {}

    def column(r: TrialResult, name: str) -> np.ndarray:
        if name in extra:
            return np.array([rec.extras.get(name, np.nan) for rec in r.records[:nrows]])
        return np.array([getattr(rec, name) for rec in r.records[:nrows]])

    for name in metric_names + extra:
        stack = np.stack([column(r, name) for r in done])
        mean = stack.mean(axis=0)
        if stack.shape[0] > 1:
            ci = Z95 * stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
        else:
            ci = np.zeros_like(mean)
        metrics[name] = {"mean": mean.tolist(), "ci_half": ci.tolist()}

    doc = {
        "aligned_by": aligned_by,
        "n_rows": nrows,
        "k": [rec.k for rec in done[0].records[:nrows]],
        "comms": comms0,
        "grads": [rec.grads for rec in done[0].records[:nrows]],
        "metrics": metrics,
        "final": {
            name: {"mean": vals["mean"][-1], "ci_half": vals["ci_half"][-1]}
            for name, vals in metrics.items()
        },
    }
    return aligned_by, doc


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> RunSummary:
    """Run all trials of a config, writing traces, provenance, and a summary.

    Trial t uses seed ``seed_base + t``.  A failing trial is recorded in the
    summary without aborting its siblings.  With ``metrics.record_timing``
    off (the default) re-running the same config reproduces every trace
    byte for byte.
    """
    cfg.validate()
    if cfg.problem.kind == "logistic_libsvm" and not Path(cfg.problem.path).exists():
        raise DataError(f"dataset file not found: {cfg.problem.path}")
    run_dir = cfg.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.toml").write_text(dumps_toml(cfg.to_dict()), encoding="utf-8")

    tasks = [(cfg, t, cfg.seed_base + t) for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, tasks))
    else:
        results = [_trial_task(task) for task in tasks]

    for res in results:
        if not res.ok:
            continue
        write_trace_csv(res.records, run_dir / f"trial_{res.trial:02d}.csv")
        if cfg.metrics.jsonl:
            write_trace_jsonl(res.records, run_dir / f"trial_{res.trial:02d}.jsonl")
    _write_provenance(cfg, results, run_dir)

    aligned_by, agg = _aggregate(results)
    failed = [{"trial": r.trial, "seed": r.seed, "error": r.error} for r in results if not r.ok]
    summary = {
        "name": cfg.name,
        "n_trials": cfg.trials,
        "failed_trials": failed,
        **agg,
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return RunSummary(
        run_dir=run_dir,
        n_trials=cfg.trials,
        failed=failed,
        aligned_by=aligned_by,
        final=agg.get("final", {}),
    )


def _write_provenance(cfg: ExperimentConfig, results: list[TrialResult], run_dir: Path) -> None:
    # topology and instance descriptors are cheap and make runs replayable
    for res in results:
        if not res.ok:
            continue
        try:
            parts = build_trial(cfg, res.seed)
        except AdapdError:
            continue
        doc = {"graph": json.loads(graph_to_json(parts.graph, parts.positions))}
        if parts.mixing is not None:
            doc["mixing"] = json.loads(mixing_to_json(parts.mixing))
        (run_dir / f"topology_{res.trial:02d}.json").write_text(
            json.dumps(doc), encoding="utf-8"
        )
        if parts.instance is not None:
            (run_dir / f"instance_{res.trial:02d}.json").write_text(
                parts.instance.to_json(), encoding="utf-8"
            )


def validate_topology(cfg: ExperimentConfig) -> dict:
    """Build the trial-0 mixing matrix and report the four-clause check."""
    if cfg.problem.kind == "localization":
        parts = build_trial(cfg, cfg.seed_base)
        graph, mixing = parts.graph, parts.mixing
    else:
        graph, mixing, _ = build_topology(cfg, cfg.seed_base)
    report = validate_mixing(mixing, graph)
    return {"ok": report.ok, "rho": mixing.rho, "clauses": report.as_dict()}


def grid_search(cfg: ExperimentConfig, workers: int = 1) -> tuple[ExperimentConfig, RunSummary, dict]:
    """Tune listed hyperparameters, then run the full config at the winner.

    Each grid point runs ``grid_trials`` trials under the same budget; the
    winner minimizes the final mean stationarity violation, with ties going
    to the smaller (more conservative) parameter values.  Points whose
    trials all fail are excluded; if every point fails the search raises.
    """
    if not cfg.grid:
        raise ConfigError("grid search needs a non-empty [grid] table")
    keys = sorted(cfg.grid)
    points = list(itertools.product(*(cfg.grid[k] for k in keys)))
    report: list[dict] = []
    best: tuple | None = None
    for idx, values in enumerate(points):
        patch = dict(zip(keys, values))
        sub = replace(
            cfg.with_algorithm(**patch),
            name=f"{cfg.name}/grid/point_{idx:02d}",
            trials=cfg.grid_trials,
            grid={},
        )
        summary = run_experiment(sub, workers=workers)
        score = summary.final.get("stationarity", {}).get("mean")
        usable = bool(summary.final) and len(summary.failed) < cfg.grid_trials
        usable = usable and score is not None and np.isfinite(score)
        report.append(
            {
                "point": idx,
                "params": patch,
                "final_stationarity": score if usable else None,
                "failed_trials": len(summary.failed),
            }
        )
        if usable:
            key = (score, values)  # ties: smaller parameters win
            if best is None or key < best[0]:
                best = (key, patch)
    if best is None:
        raise GridExhaustedError("every grid point diverged or failed")
    winner_patch = best[1]
    winner = replace(cfg.with_algorithm(**winner_patch), grid={})
    final_summary = run_experiment(winner, workers=workers)
    grid_doc = {"keys": keys, "points": report, "winner": winner_patch}
    (cfg.run_dir() / "grid_report.json").write_text(json.dumps(grid_doc, indent=2), encoding="utf-8")
    return winner, final_summary, grid_doc


def export_figures(run_dir) -> Path:
    """Emit per-metric CSV bundles (comms, k, mean, ci_half) from a summary."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"{run_dir} has no summary.json; run the experiment first")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    out = run_dir / "figures"
    out.mkdir(exist_ok=True)
    comms = summary.get("comms", [])
    ks = summary.get("k", [])
    for name, vals in summary.get("metrics", {}).items():
        lines = ["comms,k,mean,ci_half"]
        for c, k, m, h in zip(comms, ks, vals["mean"], vals["ci_half"]):
            lines.append(f"{c},{k},{m!r},{h!r}")
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out
