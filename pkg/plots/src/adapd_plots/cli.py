"""``adapd-plot``: render paper-style figures from experiment run directories."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError, TrialMismatchError
from .render import render
from .spec import FigureSpec, SpecError

__all__ = ["main"]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="adapd-plot", description="Render figures from experiment run directories"
    )
    parser.add_argument("--spec", required=True, help="JSON figure spec (metric, series, axes)")
    parser.add_argument("--out", required=True, help="output image path (.png, .pdf, .svg)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.load(args.spec)
        result = render(spec, args.out)
    except (SpecError, SchemaError, TrialMismatchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} ({len(result.series)} series)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
