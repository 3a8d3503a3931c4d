"""
Command line front end.

    nrbundle <subcommand> --config run.json --out results/ [--threads N] [--seed S]

Exit status is 0 when every point completed, 1 when some sweep points
failed (their errors are in the tables), and 2 on fatal errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ScenarioConfig, parse_config
from .errors import ConfigError, NrBundleError
from .scenarios import EXIT_FATAL, run_scenario

log = logging.getLogger("nrbundle")

# subcommand -> scenarios it accepts
SUBCOMMANDS = {
    "spectrum": ("spectrum",),
    "dynamics": ("closed_dynamics", "open_dynamics"),
    "trajectory": ("trajectory",),
    "correlations": ("correlation_sweep",),
    "witness": ("witness_sweep",),
    "resonances": ("resonance_table",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrbundle", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {' / '.join(kinds)} scenario")
        p.add_argument("--config", required=True, type=Path, help="JSON scenario config")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def load_config(path: Path, command: str, seed: int | None = None) -> ScenarioConfig:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    config = parse_config(text)
    if config.scenario not in SUBCOMMANDS[command]:
        raise ConfigError(f"scenario {config.scenario!r} does not belong to '{command}' "
                          f"(expected {', '.join(SUBCOMMANDS[command])})", "scenario")
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
        config = config.model_copy(update={"seed": seed})
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args.command, args.seed)
        if args.threads < 1:
            raise ConfigError("must be >= 1", "--threads")
        manifest = run_scenario(config, args.out, workers=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (NrBundleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if manifest.failed_points:
        print(f"{manifest.failed_points} point(s) failed; see the error column", file=sys.stderr)
    return manifest.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
