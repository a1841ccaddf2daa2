"""
Command-line front end for CESTRADE.

Subcommands run, compare, sweep, noise and validate. Exit status is 0 on
success, 1 for configuration or input errors and 2 for numerical failures.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from . import __version__
from . import constants as C
from .exceptions import (
    CONFIG_ERRORS,
    NUMERICAL_ERRORS,
    CESTradeError,
    ValidationError,
    map_external_exception,
)
from .managers.config_manager import ConfigManager, RunConfig
from .managers.study_manager import StudyManager
from .utils.format_utils import parse_number_list
from .utils.logging_config import (
    enable_debug_mode,
    get_log_file_path,
    get_logger,
    initialize_logging,
)

logger = get_logger("cestrade.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports bad arguments as validation errors."""

    def error(self, message):
        raise ValidationError(message, field="arguments")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML scenario file")
    common.add_argument(
        "--out", metavar="DIR", default=C.DEFAULT_OUTPUT_DIR, help="output directory"
    )
    common.add_argument("--seed", type=int, help="synthesis and noise seed")
    common.add_argument("--participation", type=float, help="participating fraction in (0, 1]")
    common.add_argument(
        "--model",
        choices=["competitive", "benevolent", "centralized", "baseline", "all"],
        help="model selection",
    )
    common.add_argument(
        "--tau", type=float, help="relative-change threshold of the competitive iteration"
    )
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    common.add_argument("--no-log-file", action="store_true", help="log to the console only")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per study."""
    parser = ArgumentParser(
        prog="cestrade",
        description="Community energy storage trading simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    common = _common_options()

    run = sub.add_parser("run", parents=[common], help="solve models on one scenario")
    run.set_defaults(model="competitive")

    compare = sub.add_parser("compare", parents=[common], help="three-model comparison table")
    compare.add_argument(
        "--participation-list",
        metavar="F,...",
        help="participation fractions (default 0.3,0.4,0.5)",
    )
    compare.set_defaults(model="all")

    sweep = sub.add_parser("sweep", parents=[common], help="storage capacity sweep")
    sweep.add_argument("--capacity-list", metavar="KWH,...", help="increasing capacities")
    sweep.set_defaults(model="all")

    noise = sub.add_parser("noise", parents=[common], help="forecast noise study")
    noise.add_argument("--variance-list", metavar="PCT,...", help="noise variances in percent")
    noise.add_argument("--trials", type=int, default=1, help="trials per variance")
    noise.set_defaults(model="competitive")

    validate = sub.add_parser("validate", parents=[common], help="check a scenario without solving")
    validate.set_defaults(model="all")
    return parser


def _number_list(text: Optional[str], name: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        values = parse_number_list(text)
    except ValueError:
        raise ValidationError(f"{name} must be a list of numbers", field=name, value=text)
    if not values:
        raise ValidationError(f"{name} cannot be empty", field=name, value=text)
    return values


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Translate parsed arguments into a validated RunConfig."""
    run = RunConfig(
        command=args.command,
        config_path=args.config,
        out_dir=args.out,
        seed=args.seed,
        participation=args.participation,
        model=args.model,
        tau=args.tau,
        verbose=args.verbose,
    )
    fractions = _number_list(getattr(args, "participation_list", None), "participation-list")
    if fractions is not None:
        run.participation_list = fractions
    capacities = _number_list(getattr(args, "capacity_list", None), "capacity-list")
    if capacities is not None:
        run.capacities = capacities
    variances = _number_list(getattr(args, "variance_list", None), "variance-list")
    if variances is not None:
        run.variances = variances
    if getattr(args, "trials", None) is not None:
        run.trials = args.trials
    return run.validate()


def load_config(run: RunConfig) -> ConfigManager:
    """The scenario configuration named by the run, or the defaults."""
    if run.source == "file":
        return ConfigManager.from_file(run.config_path)
    return ConfigManager()


def _report_written(written: Dict[str, object]) -> None:
    for name in sorted(written):
        print(f"{name}: {written[name]}")


def cmd_run(study: StudyManager) -> int:
    _report_written(study.run_models())
    return EXIT_OK


def cmd_compare(study: StudyManager) -> int:
    _report_written(study.compare())
    return EXIT_OK


def cmd_sweep(study: StudyManager) -> int:
    _report_written(study.sweep())
    return EXIT_OK


def cmd_noise(study: StudyManager) -> int:
    _report_written(study.noise())
    return EXIT_OK


def cmd_validate(study: StudyManager) -> int:
    summary = study.validate()
    for key, value in summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[StudyManager], int]] = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "noise": cmd_noise,
    "validate": cmd_validate,
}


def _fail(error: CESTradeError, status: int) -> int:
    print(f"error: {error.get_user_friendly_message()}", file=sys.stderr)
    if error.message and error.message not in error.get_user_friendly_message():
        print(f"  {error.message}", file=sys.stderr)
    logger.debug("Failure details", exc_info=error)
    return status


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the command-line tool.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        Exit status
    """
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValidationError as e:
        parser.print_usage(sys.stderr)
        return _fail(e, EXIT_CONFIG)

    initialize_logging(
        "CESTRADE", logging.INFO, log_to_file=not args.no_log_file, run_tag=args.command
    )
    if args.verbose:
        enable_debug_mode()
    log_file = get_log_file_path()
    if log_file:
        logger.debug(f"Writing log to {log_file}")

    try:
        run = run_config_from_args(args)
        study = StudyManager(load_config(run), run)
        return COMMANDS[run.command](study)
    except CONFIG_ERRORS as e:
        return _fail(e, EXIT_CONFIG)
    except NUMERICAL_ERRORS as e:
        return _fail(e, EXIT_NUMERICAL)
    except CESTradeError as e:
        return _fail(e, EXIT_CONFIG)
    except OSError as e:
        return _fail(map_external_exception(e, "writing results"), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
