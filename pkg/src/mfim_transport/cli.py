"""Command-line entry point for the experiment runners."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import (
    ExperimentConfig,
    PRESETS,
    load_config,
    load_config_file,
    preset_config,
)
from .errors import ConfigError
from . import workflows

_RUNNERS = {
    "run-ideal": workflows.run_ideal,
    "run-noisy": workflows.run_noisy,
    "run-exact": workflows.run_exact,
    "eth-report": workflows.eth_report,
    "sampling-report": workflows.sampling_report,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="bundled configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (advisory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfim-transport",
        description="Energy-transport simulation suite for the mixed-field Ising chain",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"{name} workflow")
        _add_common(p)
    fit = sub.add_parser("fit", help="power-law fit over a written series CSV")
    fit.add_argument("--input", type=Path, required=True)
    fit.add_argument("--kind", choices=["decay", "growth"], default="decay")
    fit.add_argument("--window", type=float, nargs=2, required=True, metavar=("T0", "T1"))
    fit.add_argument("--column", default="value")
    fit.add_argument("--offset", type=int, default=0, help="site offset for long-format files")
    fit.add_argument("--out", type=Path, help="write the fit JSON here (default stdout)")
    return parser


def _resolve_config(args: argparse.Namespace, workflow: str) -> ExperimentConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("give --config and/or --preset")
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
        if args.preset is not None:
            merged = json.loads(json.dumps(PRESETS[args.preset]))
            merged.update(data)
            data = merged
        if args.seed is not None:
            data["seed"] = args.seed
        config = load_config(data)
    else:
        overrides = {} if args.seed is None else {"seed": args.seed}
        config = preset_config(args.preset, overrides)
    if config.workflow != workflow:
        raise ConfigError(
            f"configuration is for workflow {config.workflow!r}, "
            f"but the {workflow!r} command was invoked"
        )
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            result = workflows.fit_from_csv(
                args.input, args.kind, tuple(args.window), args.column, args.offset
            )
            text = json.dumps(result, indent=2, sort_keys=True)
            if args.out:
                args.out.write_text(text + "\n")
            else:
                print(text)
            return 0
        config = _resolve_config(args, args.command)
        summary = _RUNNERS[args.command](config, args.out)
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return 0
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
