"""Figure rendering from experiment run directories."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import aggregate, load_run
from .spec import FigureSpec

__all__ = ["SeriesData", "RenderResult", "render"]

_X_LABELS = {
    "communications": "neighbour communications",
    "iterations": "iterations",
    "gradients": "gradient evaluations (slowest agent)",
}


@dataclass
class SeriesData:
    label: str
    x: np.ndarray
    mean: np.ndarray
    ci_half: np.ndarray


@dataclass
class RenderResult:
    out_path: Path
    series: list[SeriesData]


def render(spec: FigureSpec, out_path) -> RenderResult:
    """Render one figure; returns the exact arrays that were plotted.

    Rendering is pure with respect to the input CSVs: the same traces give
    the same plotted arrays (image bytes may differ across backends).
    """
    out_path = Path(out_path)
    series_data: list[SeriesData] = []
    for s in spec.series:
        run = load_run(s.run_dir)
        x, mean, ci = aggregate(run, spec.metric, spec.x_column)
        series_data.append(SeriesData(label=s.label, x=x, mean=mean, ci_half=ci))

    fig, ax = plt.subplots(figsize=(5.0, 3.6), constrained_layout=True)
    for sd in series_data:
        (line,) = ax.plot(sd.x, sd.mean, label=sd.label, linewidth=1.6)
        if spec.confidence_band and np.any(sd.ci_half > 0):
            ax.fill_between(
                sd.x,
                sd.mean - sd.ci_half,
                sd.mean + sd.ci_half,
                alpha=0.25,
                color=line.get_color(),
                linewidth=0,
            )
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[spec.x_axis])
    ax.set_ylabel(spec.metric.replace("_", " "))
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)
    return RenderResult(out_path=out_path, series=series_data)
