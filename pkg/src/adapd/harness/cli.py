"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric divergence,
4 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import AdapdError, ConfigError, DataError, DivergenceError
from .config import load_config
from .run import export_figures, grid_search, run_experiment, validate_topology

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapd", description="Decentralized consensus-optimization experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p) -> None:
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted config override, e.g. algorithm.eta=0.05 (repeatable)",
        )

    p_run = sub.add_parser("run", help="run all trials of one config")
    add_config_args(p_run)
    p_run.add_argument("--workers", type=int, default=1, help="parallel trial workers")

    p_val = sub.add_parser("validate-topology", help="check the mixing-matrix contract")
    add_config_args(p_val)

    p_grid = sub.add_parser("grid", help="grid-search hyperparameters, then run the winner")
    add_config_args(p_grid)
    p_grid.add_argument("--workers", type=int, default=1)

    p_fig = sub.add_parser("export-figures", help="emit per-metric CSV bundles from a run")
    p_fig.add_argument("--run-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.override)
            summary = run_experiment(cfg, workers=args.workers)
            print(f"run complete: {summary.run_dir}")
            for name, vals in summary.final.items():
                print(f"  final {name}: {vals['mean']:.6g} +- {vals['ci_half']:.3g}")
            if summary.failed:
                print(f"  {len(summary.failed)} trial(s) failed; see summary.json")
            return 0
        if args.command == "validate-topology":
            cfg = load_config(args.config, args.override)
            report = validate_topology(cfg)
            print(json.dumps(report, indent=2))
            return 0 if report["ok"] else 2
        if args.command == "grid":
            cfg = load_config(args.config, args.override)
            winner, summary, grid_doc = grid_search(cfg, workers=args.workers)
            print(f"grid winner: {grid_doc['winner']}")
            print(f"run complete: {summary.run_dir}")
            return 0
        if args.command == "export-figures":
            out = export_figures(args.run_dir)
            print(f"figure bundles written to {out}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    except AdapdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
