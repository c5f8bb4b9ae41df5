from .io import RunData, SchemaError, TrialMismatchError, Z95, aggregate, load_run
from .render import RenderResult, SeriesData, render
from .spec import FigureSpec, SeriesSpec, SpecError

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SeriesSpec",
    "SpecError",
    "SchemaError",
    "TrialMismatchError",
    "RunData",
    "load_run",
    "aggregate",
    "Z95",
    "render",
    "RenderResult",
    "SeriesData",
    "__version__",
]
