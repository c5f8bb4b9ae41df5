"""Figure specifications: which metric, which runs, which axes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["FigureSpec", "SeriesSpec", "SpecError"]

_X_AXES = {"communications": "comms", "iterations": "k", "gradients": "grads"}


class SpecError(ValueError):
    """The figure spec file is malformed."""


@dataclass(frozen=True)
class SeriesSpec:
    run_dir: str
    label: str


@dataclass(frozen=True)
class FigureSpec:
    """One curve-per-run figure over a shared x axis.

    ``metric`` must be a column of the runs' trace CSVs; ``x_axis`` is one
    of communications / iterations / gradients.  With ``confidence_band``
    the mean curve gets a 95% normal band across trials (a single-trial
    series collapses to its line).
    """

    metric: str
    series: tuple[SeriesSpec, ...]
    x_axis: str = "communications"
    log_x: bool = False
    log_y: bool = True
    confidence_band: bool = True
    title: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.metric:
            raise SpecError("spec needs a metric name")
        if not self.series:
            raise SpecError("spec needs at least one series")
        if self.x_axis not in _X_AXES:
            raise SpecError(f"x_axis must be one of {sorted(_X_AXES)}, got {self.x_axis!r}")

    @property
    def x_column(self) -> str:
        return _X_AXES[self.x_axis]

    @classmethod
    def from_dict(cls, doc: dict) -> "FigureSpec":
        doc = dict(doc)
        series_raw = doc.pop("series", [])
        series = []
        for item in series_raw:
            if not isinstance(item, dict) or "run_dir" not in item:
                raise SpecError(f"series entries need run_dir (and label), got {item!r}")
            series.append(SeriesSpec(run_dir=str(item["run_dir"]), label=str(item.get("label", item["run_dir"]))))
        known = {"metric", "x_axis", "log_x", "log_y", "confidence_band", "title"}
        fields = {k: doc.pop(k) for k in list(doc) if k in known}
        return cls(series=tuple(series), extras=doc, **fields)

    @classmethod
    def load(cls, path) -> "FigureSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise SpecError(f"spec file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)
