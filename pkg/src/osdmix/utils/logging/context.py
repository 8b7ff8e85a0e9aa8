"""Logging context management utilities."""

import uuid
from typing import Any, Dict

import structlog


def set_context(key: str, value: Any) -> None:
    """
    Bind a key-value pair to the logging context of the current execution context.

    Args:
        key: The context key (e.g., "experiment", "seed").
        value: The context value.
    """
    structlog.contextvars.bind_contextvars(**{key: value})


def clear_context() -> None:
    """Clear all key-value pairs from the logging context."""
    structlog.contextvars.clear_contextvars()


def get_context() -> Dict[str, Any]:
    """
    Get a copy of the current logging context.

    Returns:
        A dictionary containing the current context.
    """
    return dict(structlog.contextvars.get_contextvars())


class RunContext:
    """
    A context manager binding per-run logging context within a `with` block.

    Adds a short `run_id` on entry and restores the previous context on exit.

    Example:
        with RunContext(experiment="clt-run", seed=7):
            logger.info("simulating")  # carries experiment, seed and run_id
    """

    def __init__(self, **kwargs: Any):
        self.context_to_set = kwargs
        self.context_to_set.setdefault("run_id", uuid.uuid4().hex[:12])
        self.previous_context: Dict[str, Any] = {}

    def __enter__(self) -> "RunContext":
        self.previous_context = get_context()
        for key, value in self.context_to_set.items():
            set_context(key, value)
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> bool:
        clear_context()
        for key, value in self.previous_context.items():
            set_context(key, value)
        return False
