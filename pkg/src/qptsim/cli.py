"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError
from .pipeline import (
    PRESETS,
    load_config,
    load_preset,
    run_pipeline,
    run_plotdata,
    run_reconstruct,
    run_simulate,
)

_COMMANDS = {
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "plotdata": run_plotdata,
    "pipeline": run_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qptsim",
        description=(
            "Simulate coincidence measurements on one arm of an entangled photon "
            "pair and reconstruct the device in that arm by linear inversion."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "draw coincidence events and write the event log"),
        ("reconstruct", "estimate state/unitary/Choi from the event log"),
        ("plotdata", "emit the bar-chart table of a result document"),
        ("pipeline", "simulate, reconstruct and emit plot data in one run"),
    ):
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="JSON config file")
        src.add_argument("--preset", metavar="NAME", choices=PRESETS,
                         help=f"bundled config: {', '.join(PRESETS)}")
        p.add_argument("--out", metavar="DIR", default=".",
                       help="directory for outputs (default: current directory)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the plan seed from the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_preset(args.preset) if args.preset else load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in 64 unsigned bits")
            cfg.seed = args.seed
        _COMMANDS[args.command](cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
