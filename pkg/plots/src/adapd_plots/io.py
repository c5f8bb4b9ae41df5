"""Run-directory ingestion: trace CSVs, summary cross-checks, aggregation.

This package consumes only the documented file formats of the experiment
harness (per-trial ``trial_XX.csv`` traces and ``summary.json``).  The
mean/CI aggregation deliberately duplicates the harness arithmetic — same
estimator, same normal quantile — and is cross-checked against the summary
file whenever one is present, so a drifting duplicate fails loudly instead
of plotting silently different numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "TrialMismatchError", "RunData", "load_run", "aggregate", "Z95"]

# 97.5% normal quantile; fixed to match the harness summary writer bit-for-bit
Z95 = 1.959963984540054


class SchemaError(ValueError):
    """A requested column is absent from the trace CSVs."""


class TrialMismatchError(ValueError):
    """Trial traces inside one run do not align for band computation."""


@dataclass
class RunData:
    run_dir: Path
    columns: dict[str, np.ndarray]  # column -> (n_trials, n_rows)
    n_trials: int
    summary: dict | None

    def require(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(
                f"metric {name!r} not in traces under {self.run_dir}; "
                f"available columns: {sorted(self.columns)}"
            )
        return self.columns[name]


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    out: dict[str, np.ndarray] = {}
    for idx, name in enumerate(header):
        out[name] = np.array(
            [float(r[idx]) if idx < len(r) and r[idx] != "" else np.nan for r in rows]
        )
    return out


def load_run(run_dir) -> RunData:
    """Read every trial trace of a run, aligned and stacked per column."""
    run_dir = Path(run_dir)
    trial_paths = sorted(run_dir.glob("trial_*.csv"))
    if not trial_paths:
        raise FileNotFoundError(f"no trial traces under {run_dir}")
    trials = [_read_csv(p) for p in trial_paths]
    names = list(trials[0])
    for p, t in zip(trial_paths[1:], trials[1:]):
        if list(t) != names:
            raise TrialMismatchError(f"{p} has different columns than {trial_paths[0]}")
    n_rows = min(len(t[names[0]]) for t in trials)
    columns = {
        name: np.stack([t[name][:n_rows] for t in trials]) for name in names
    }
    summary = None
    summary_path = run_dir / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
    return RunData(run_dir=run_dir, columns=columns, n_trials=len(trials), summary=summary)


def aggregate(run: RunData, metric: str, x_column: str):
    """(x, mean, ci_half) for a metric, cross-checked against the summary.

    The x axis comes from trial 0 (trials must agree for communications to
    be comparable); the band is the 95% normal half-width across trials.
    """
    values = run.require(metric)
    xs = run.require(x_column)
    if run.n_trials > 1 and not np.array_equal(xs, np.broadcast_to(xs[0], xs.shape)):
        raise TrialMismatchError(
            f"trials under {run.run_dir} disagree on the {x_column} grid; "
            "bands across trials need matched counts"
        )
    mean = values.mean(axis=0)
    if run.n_trials > 1:
        ci = Z95 * values.std(axis=0, ddof=1) / np.sqrt(run.n_trials)
    else:
        ci = np.zeros_like(mean)
    if run.summary is not None and metric in run.summary.get("metrics", {}):
        ref = run.summary["metrics"][metric]
        ref_mean = np.asarray(ref["mean"])
        ref_ci = np.asarray(ref["ci_half"])
        n = min(len(ref_mean), len(mean))
        if not (np.array_equal(ref_mean[:n], mean[:n]) and np.array_equal(ref_ci[:n], ci[:n])):
            raise TrialMismatchError(
                f"recomputed {metric} aggregation disagrees with summary.json under {run.run_dir}"
            )
    return xs[0], mean, ci
