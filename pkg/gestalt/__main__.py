from __future__ import annotations

import argparse
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

from loguru import logger

import gestalt
from gestalt.config import RunConfig, load_config
from gestalt.errors import DataError, GestaltError, UsageError
from gestalt.experiments import get_driver

STAGES = ("preprocess", "pretrain", "finetune", "predict", "evaluate")
ERROR_CATEGORIES = {UsageError.exit_code: "usage error", DataError.exit_code: "data error", 4: "internal error"}


class Parser(argparse.ArgumentParser):
    """
    A subclass of argparse.ArgumentParser that prints its messages through loguru, so usage and
    help text look like the rest of the output.
    """

    def _print_message(self, message: str, file: Any | None = None) -> None:
        if message:
            logger.log("CLI", message.rstrip("\n"))


def set_up_logger():
    """Sets up Loguru. clears default handlers, registers the main custom handler, and adds the CLI log level."""
    # Clear any default handlers to avoid duplicate logs
    logger.remove()

    # Add custom handler (stdout)
    logger.add(
        sink=sys.stdout,
        level=gestalt.system_config.log_level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        backtrace=True,
        diagnose=True,
    )
    try:
        logger.level("CLI")
    except ValueError:
        logger.level("CLI", no=255, color="<green>")


def build_parser() -> Parser:
    parser = Parser(prog="gestalt", description="Facial gestalt region-ensemble training and evaluation")
    parser.add_argument("--version", action="version", version=f"gestalt {gestalt.__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = Parser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Path to the run config (TOML).")
    common.add_argument("--out", type=Path, help="Run directory; defaults to runs/<experiment name>.")
    common.add_argument("--seed", type=int, help="Override [experiment] seed.")
    common.add_argument("--scale-factor", type=float, help="Override [experiment] scale_factor.")
    common.add_argument("--workers", type=int, help="Worker processes for region training (default: all cores).")
    common.add_argument("--debug-checks", action="store_true", help="Check every activation and gradient for NaN/inf.")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level.")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Log warnings and errors only.")

    helps = {
        "preprocess": "Exclude unusable samples, build the template and cut region crops.",
        "pretrain": "Pretrain one network per region on identity labels.",
        "finetune": "Replace the heads and fine-tune every region on the training classes.",
        "predict": "Score the test crops and aggregate the regions.",
        "evaluate": "Compute metrics, permutation tests and plots from the predictions.",
    }
    for stage in STAGES:
        stage_parser = subparsers.add_parser(stage, parents=[common], help=helps[stage])
        if stage == "predict":
            stage_parser.add_argument(
                "--dump-activations", action="store_true", help="Write the pooling-layer activations of one test crop per region."
            )
        stage_parser.set_defaults(func=run_stage)

    experiment_parser = subparsers.add_parser("experiment", parents=[common], help="Run every stage in order.")
    experiment_parser.add_argument(
        "--dump-activations", action="store_true", help="Write the pooling-layer activations of one test crop per region."
    )
    experiment_parser.set_defaults(func=run_stage)
    return parser


def run_stage(run: RunConfig) -> int:
    assert run.experiment is not None
    driver = get_driver(run.experiment, run.out, run.workers)
    if run.command == "experiment":
        report = driver.run()
        logger.log("CLI", f"{report.kind} experiment done: {run.out / 'report.json'}")
        for result in report.topk:
            logger.log("CLI", f"top-{result.k} accuracy {100 * result.accuracy:.2f}%")
        return 0
    stage: Callable[[], Any] = getattr(driver, run.command)
    stage()
    logger.log("CLI", f"{run.command} done: {run.out}")
    return 0


def build_run_config(args: argparse.Namespace) -> RunConfig:
    if args.workers is not None and args.workers < 1:
        raise UsageError(f"--workers must be at least 1, got {args.workers}")
    if args.scale_factor is not None and args.scale_factor <= 0:
        raise UsageError(f"--scale-factor must be positive, got {args.scale_factor}")
    if args.seed is not None and args.seed < 0:
        raise UsageError(f"--seed must be non-negative, got {args.seed}")
    overrides = {"seed": args.seed, "scale_factor": args.scale_factor}
    experiment = load_config(args.config, overrides)
    out = gestalt.resolve_output_path(args.out or Path("runs") / experiment.experiment.name)
    return RunConfig(
        command=args.command,
        out=out,
        config_path=args.config,
        experiment=experiment,
        seed=experiment.seed,
        scale_factor=experiment.experiment.scale_factor,
        workers=args.workers or gestalt.system_config.workers,
        log_level=gestalt.system_config.log_level,
    )


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the program, implements a cli via argparse. Returns the exit code."""
    set_up_logger()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help and --version exit 0, usage errors exit 2
        return e.code if isinstance(e.code, int) else 2

    log_level = "DEBUG" if args.verbose else "WARNING" if args.quiet else "INFO"
    gestalt.update_system_config(
        gestalt.system_config.model_copy(
            update={
                "invoked_command": args.command,
                "log_level": log_level,
                "debug_checks": args.debug_checks,
                "dump_activations": getattr(args, "dump_activations", False),
            }
        )
    )
    set_up_logger()

    try:
        run = build_run_config(args)
        run.check_paths()
        return args.func(run)
    except GestaltError as e:
        logger.error(f"{ERROR_CATEGORIES.get(e.exit_code, "internal error")}: {e}")
        return e.exit_code
    except Exception:
        logger.exception("internal error: unexpected exception")
        return 4


if __name__ == "__main__":
    sys.exit(main())
