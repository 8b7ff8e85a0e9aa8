"""
Command-Line Interface for osdmix.

This module defines the CLI commands and options for the osdmix application.
"""

from typing import Optional

import typer

from osdmix.cli.commands.config import config_app
from osdmix.cli.commands.experiments import COMMANDS
from osdmix.cli.common import version_callback
from osdmix.config import get_settings
from osdmix.utils.logging import configure_logging

app = typer.Typer(
    name="osdmix",
    help="Operator-selfdecomposable limits of strongly mixing sequences",
    no_args_is_help=True,
)

for experiment, command in COMMANDS.items():
    app.command(experiment.value)(command)

app.add_typer(config_app, name="config")


@app.callback()
def main(
    version: bool = typer.Option(
        False, "--version", "-V", callback=version_callback, help="Show version and exit"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable verbose output"),
    log_file: Optional[str] = typer.Option(None, "--log-file", help="Log to file"),
    json_logs: bool = typer.Option(False, "--json-logs", help="Render logs as JSON"),
) -> None:
    """
    osdmix: strongly mixing sequences under operator normalization.

    Simulate mixing sequences, follow their matrix-normalized partial sums,
    recover the generator of the limit's decomposability semigroup and
    verify operator-selfdecomposability by its random-integral representation.
    """
    settings = get_settings().logging
    level = "DEBUG" if verbose else settings.level
    configure_logging(
        level=level,
        log_file=log_file or settings.output_file,
        json_output=json_logs or settings.json_output,
    )


if __name__ == "__main__":
    app()
