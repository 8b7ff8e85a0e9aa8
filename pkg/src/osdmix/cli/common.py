"""
Common utilities and variables used across CLI commands.
"""

from pathlib import Path
from typing import Any, Dict, Optional

import typer
from rich.console import Console
from rich.table import Table

from osdmix import __version__
from osdmix.config import Experiment, RunConfig, get_settings, load_run_config
from osdmix.core.models import Report
from osdmix.utils.errors import (
    ConfigurationError,
    OsdmixError,
    format_error,
    handle_error,
    register_error_handler,
)
from osdmix.utils.logging import get_logger

# stdout carries the result summary, stderr carries errors
console = Console()
err_console = Console(stderr=True)
logger = get_logger(__name__)

EXIT_FAILED = 1
EXIT_CONFIG = 2


def version_callback(value: bool) -> None:
    """Print version information and exit."""
    if value:
        console.print(f"[bold green]osdmix[/bold green] version: [bold]{__version__}[/bold]")
        raise typer.Exit()


def _report_failure(code: int):
    def handler(error: OsdmixError) -> int:
        err_console.print(f"[bold red]{format_error(error)}[/bold red]")
        logger.debug("command failed", error=type(error).__name__, exit_code=code)
        return code

    return handler


# configuration problems first: handle_error picks the first matching class
register_error_handler(ConfigurationError, _report_failure(EXIT_CONFIG))
register_error_handler(OsdmixError, _report_failure(EXIT_FAILED))


def resolve_config(
    experiment: Experiment,
    config_file: Optional[Path],
    overrides: Dict[str, Any],
) -> RunConfig:
    """
    Resolve the run configuration of one command.

    Flags left unset fall back to the file, then to OSDMIX_* settings for the
    output directory and worker count, then to model defaults.
    """
    config = load_run_config(config_file, {**overrides, "experiment": experiment.value})
    settings = get_settings()
    updates: Dict[str, Any] = {}
    if "out_path" not in config.model_fields_set:
        updates["out_path"] = settings.output_dir
    if "workers" not in config.model_fields_set:
        updates["workers"] = settings.execution.workers
    return config.model_copy(update=updates) if updates else config


def print_summary(report: Report, out_path: str) -> None:
    table = Table(title=f"{report.experiment} ({out_path})")
    table.add_column("Flag", style="cyan", no_wrap=True)
    table.add_column("Value", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Result")
    for flag in report.flags:
        table.add_row(
            flag.name,
            "" if flag.value is None else f"{flag.value:.4g}",
            "" if flag.threshold is None else f"{flag.threshold:.4g}",
            "[green]pass[/green]" if flag.passed else "[red]FAIL[/red]",
        )
    console.print(table)
    verdict = "[bold green]PASS[/bold green]" if report.passed else "[bold red]FAIL[/bold red]"
    console.print(f"Overall: {verdict}")


def run_command(
    experiment: Experiment,
    config_file: Optional[Path],
    overrides: Dict[str, Any],
) -> None:
    """Resolve, run and summarize one experiment; always ends in typer.Exit."""
    from osdmix.core.runner import run_experiment

    try:
        config = resolve_config(experiment, config_file, overrides)
        report = run_experiment(config)
    except OsdmixError as e:
        raise typer.Exit(code=handle_error(e)) from e
    print_summary(report, config.out_path)
    raise typer.Exit(code=0 if report.passed else EXIT_FAILED)
