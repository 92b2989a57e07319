# dcda/cli.py
"""Command-line entry point: run | sweep | reproduce | bounds | serve"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dcda.config import settings
from dcda.core.exceptions import ConfigurationError, DCDAException, FileHandlingException
from dcda.services.config_parser import parse_config, parse_sweep
from dcda.services.experiment_runner import EXIT_OK, PRESETS, ExperimentRunner, exit_code_for
from dcda.utils.logger import setup_logging

logger = logging.getLogger(__name__)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FileHandlingException(f"Cannot read {path}: {str(e)}") from e


def _seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcda", description="Distributed coordinate dual averaging simulator")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level (default: %(default)s)")
    parser.add_argument("--log-file", default=settings.LOG_FILE, help="Also log to this file")
    parser.add_argument("--output-dir", default=settings.OUTPUT_DIR, help="Directory for generated files")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment config")
    run.add_argument("config", help="Path to a key = value config file")

    sweep = sub.add_parser("sweep", help="Run a sweep file")
    sweep.add_argument("sweepfile", help="Config with sweep.<key> = v1, v2 lines")
    sweep.add_argument("--jobs", type=int, default=settings.MAX_CONCURRENT_RUNS, help="Concurrent runs")

    reproduce = sub.add_parser("reproduce", help="Run a comparison preset")
    reproduce.add_argument("preset", choices=PRESETS)
    reproduce.add_argument("--seeds", type=_seeds, default=[0], help="Seed list, e.g. '0,1,2'")
    reproduce.add_argument("--T", type=int, default=None, help="Horizon (default: DEFAULT_HORIZON)")

    bounds = sub.add_parser("bounds", help="Evaluate bounds against a trace")
    bounds.add_argument("config", help="Config the trace was produced with")
    bounds.add_argument("trace", help="Trace CSV")
    bounds.add_argument("--out", default=None, help="Output CSV (default: <trace>.bounds.csv)")
    bounds.add_argument("--delta", type=float, default=0.05, help="Failure probability of the high-probability bounds")

    serve = sub.add_parser("serve", help="Start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    runner = ExperimentRunner(output_dir=args.output_dir)
    if args.command == "run":
        config = parse_config(_read(args.config))
        code, files = runner.run_experiment(config)
        for f in files:
            print(f)
        return code
    if args.command == "sweep":
        spec = parse_sweep(_read(args.sweepfile))
        frame = asyncio.run(runner.run_sweep(spec, concurrent_limit=args.jobs))
        failed = frame[frame["status"] != EXIT_OK]
        return EXIT_OK if failed.empty else int(failed["status"].max())
    if args.command == "reproduce":
        frame = runner.reproduce(args.preset, args.seeds, T=args.T)
        print(frame.to_string(index=False))
        return EXIT_OK
    if args.command == "bounds":
        config = parse_config(_read(args.config))
        runner.evaluate_bounds(config, args.trace, args.out, strict=True, delta=args.delta)
        return EXIT_OK
    if args.command == "serve":
        import uvicorn

        uvicorn.run("dcda.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())
        return EXIT_OK
    raise ConfigurationError(f"Unknown command: {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    try:
        return _dispatch(args)
    except DCDAException as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
