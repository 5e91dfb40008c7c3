"""Config-driven batch experiment runner.

Exit codes: 0 success, 2 configuration error, 3 simulation error,
4 fit error. Flags override config values; the thread count affects
wall time only, never output bytes.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .analysis import FitError, FlatTraceError
from .config import ConfigError, parse_config
from .engine import SimulationError
from .presets import PresetError, run_preset

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_FIT = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spindyad",
        description="Spin-dyad coherence simulator: run a preset experiment from a config file.",
    )
    parser.add_argument("--config", required=True, help="path to the experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument(
        "--trajectories", type=int, default=None, help="override the trajectory count"
    )
    parser.add_argument("--no-plot", action="store_true", help="skip SVG plot emission")
    parser.add_argument(
        "--threads", type=int, default=1, help="worker threads (wall time only, same output)"
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out if args.out is not None else cfg.text("output", "directory")
    plot = cfg.flag("output", "plot") and not args.no_plot
    try:
        summary = run_preset(
            cfg,
            out_dir,
            seed=args.seed,
            trajectories=args.trajectories,
            threads=max(1, args.threads),
            plot=plot,
        )
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlatTraceError:
        # protected-state outcome, reported as data rather than failure
        print("result: no decay resolvable (protected state)", file=sys.stderr)
        return EXIT_OK
    except FitError as exc:
        print(f"error: fit: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (SimulationError, PresetError) as exc:
        print(f"error: simulation: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    for key, value in summary.items():
        if not isinstance(value, (list, dict)):
            print(f"{key} = {value}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
