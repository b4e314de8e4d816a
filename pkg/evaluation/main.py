#!/usr/bin/env python3
"""
Main entry point: ``rigidlab run <config>``, ``rigidlab catalog``, ``rigidlab schema``
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from datetime import datetime

from evaluation.core.evaluator import Evaluator
from evaluation.core.schema import CONFIG_SCHEMA, SUMMARY_SCHEMA
from evaluation.core.utils.config_loader import load_defaults, load_experiment
from evaluation.reports.report_generator import ReportGenerator
from rigidlab.catalog import list_catalog
from rigidlab.config import get_settings
from rigidlab.errors import ConfigError

# 获取项目根目录
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

EXIT_PASS = 0
EXIT_ASSERTION_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

logger = logging.getLogger(__name__)


def setup_logging(log_dir: str, verbose: int = 0) -> None:
    """Stdout and a per-run log file; -v gives INFO, -vv DEBUG."""
    os.makedirs(log_dir, exist_ok=True)
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, get_settings().LOG_LEVEL, logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(
                os.path.join(
                    log_dir,
                    f"rigidlab_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log",
                )
            ),
        ],
        force=True,
    )


def setup_argparser():
    """设置命令行参数解析"""
    parser = argparse.ArgumentParser(
        prog="rigidlab", description="Symplectic rigidity experiment runner"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run an experiment configuration")
    run_parser.add_argument(
        "config", type=str, help="Path to the experiment config (JSON or YAML)"
    )
    run_parser.add_argument(
        "--defaults",
        type=str,
        default=os.path.join(ROOT_DIR, "config", "config.yaml"),
        help="Path to the run defaults",
    )
    run_parser.add_argument("--output-dir", type=str, help="Directory for the report files")
    run_parser.add_argument(
        "--workers", type=int, help="Worker threads (capped by RIGIDLAB_THREADS)"
    )
    run_parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Increase verbosity (can be used multiple times)",
    )

    subparsers.add_parser("catalog", help="List the built-in families")

    schema_parser = subparsers.add_parser("schema", help="Print the published JSON schema")
    schema_parser.add_argument(
        "--summary", action="store_true", help="Print the run summary schema instead"
    )
    return parser


async def run_experiment(args) -> int:
    """Load, run and report one experiment; returns the exit code."""
    try:
        defaults = load_defaults(args.defaults)
        experiment = load_experiment(args.config)
    except ConfigError as e:
        logger.error(f"Failed to load configuration: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.workers is not None:
        defaults["workers"] = args.workers
    output_dir = args.output_dir or experiment.get("output_dir") or defaults.get(
        "output_dir", "results"
    )
    defaults["output_dir"] = output_dir
    if args.output_dir:
        experiment = dict(experiment)
        experiment.pop("output_dir", None)
    logger.info(f"Loaded configuration from {args.config}")

    try:
        evaluator = Evaluator(
            experiment,
            defaults,
            base_dir=os.path.dirname(os.path.abspath(args.config)),
        )
        result = await evaluator.run_evaluation()
        ReportGenerator(result, experiment, output_dir).generate()
    except Exception as e:
        # bad catalog references surface while items resolve their inputs
        if isinstance(e, ConfigError) or isinstance(getattr(e, "cause", None), ConfigError):
            logger.error(f"Configuration error: {e}")
            print(str(e), file=sys.stderr)
            return EXIT_CONFIG_ERROR
        logger.error(f"Error during execution: {e}", exc_info=True)
        print(str(e), file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    if not result.passed:
        failed = [f"{a.item}: {a.name}" for a in result.assertions if not a.passed]
        logger.warning(f"{len(failed)} assertion(s) failed: {'; '.join(failed)}")
        return EXIT_ASSERTION_FAILURE
    return EXIT_PASS


def main(argv=None) -> int:
    """主函数"""
    parser = setup_argparser()
    args = parser.parse_args(argv)

    if args.command == "catalog":
        print(list_catalog())
        return EXIT_PASS
    if args.command == "schema":
        print(json.dumps(SUMMARY_SCHEMA if args.summary else CONFIG_SCHEMA, indent=2))
        return EXIT_PASS

    try:
        log_dir = load_defaults(args.defaults).get("log_dir", "logs")
    except ConfigError:
        log_dir = "logs"
    setup_logging(log_dir, args.verbose)
    return asyncio.run(run_experiment(args))


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
