"""
Structured Logging Package for osdmix.

Provides context-aware structured logging using structlog and Rich.

Key components:
- `get_logger`: Retrieves a logger instance bound with current context.
- `configure_logging`: Sets up logging level, format, and optional file output.
- `RunContext`: Context manager binding experiment/seed/run id to every record.
- `set_context`, `clear_context`, `get_context`: Functions for manual context management.
"""

import structlog

from .context import RunContext, clear_context, get_context, set_context
from .setup import add_file_handler, configure_logging


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a logger instance for a module.

    Context bound through `set_context` or `RunContext` is merged into every
    record at emit time, so module-level loggers pick it up as well.

    Args:
        name: The logger name, typically `__name__` of the calling module.
    """
    return structlog.get_logger(name)


__all__ = [
    "get_logger",
    "configure_logging",
    "add_file_handler",
    "RunContext",
    "set_context",
    "clear_context",
    "get_context",
]
