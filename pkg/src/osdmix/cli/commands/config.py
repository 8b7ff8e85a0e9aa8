"""
Configuration management commands for osdmix.
"""

from pathlib import Path
from typing import Optional

import typer
from rich import box
from rich.table import Table

from osdmix.cli.common import console, logger
from osdmix.config import (
    RunConfig,
    get_settings,
    load_run_config,
    render_flat,
    save_config_file,
)
from osdmix.utils.errors import OsdmixError, handle_error

config_app = typer.Typer(help="Configuration management commands")


@config_app.command("init")
def config_init(
    path: Path = typer.Argument(..., help="Target file; .cfg/.txt, .yaml or .json by suffix"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file"),
) -> None:
    """Write the default run configuration."""
    if path.exists() and not force:
        console.print(f"[yellow]{path} exists; use --force to overwrite[/yellow]")
        raise typer.Exit(code=1)
    try:
        save_config_file(RunConfig().model_dump(mode="json"), path)
    except OsdmixError as e:
        raise typer.Exit(code=handle_error(e)) from e
    logger.info("wrote default configuration", path=str(path))
    console.print(f"Default configuration written to: [bold green]{path}[/bold green]")


@config_app.command("show")
def config_show(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Configuration file"),
) -> None:
    """Show the resolved run configuration and the ambient settings."""
    try:
        run_config = load_run_config(config)
        settings = get_settings()
    except OsdmixError as e:
        raise typer.Exit(code=handle_error(e)) from e

    table = Table(title="osdmix Configuration", box=box.ROUNDED)
    table.add_column("Setting", style="cyan", no_wrap=True)
    table.add_column("Value", style="green")

    for line in render_flat(run_config.model_dump(mode="json")).splitlines():
        key, _, value = line.partition(" = ")
        table.add_row(key, value)

    table.add_row("Log Level", settings.logging.level)
    table.add_row("Log File", settings.logging.output_file or "Console")
    table.add_row("Chunk Size", str(settings.execution.chunk_size))
    table.add_row("Output Dir", settings.output_dir)
    console.print(table)
