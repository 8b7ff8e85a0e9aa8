"""
Configuration System for osdmix.

Ambient settings come from OSDMIX_* environment variables; experiment runs are
described by a RunConfig loaded from YAML, JSON or flat ``key = value`` files
and overridden by command-line flags.
"""

from .file_io import load_config_file, parse_flat, render_flat, save_config_file
from .loader import (
    DEFAULT_CONFIG_PATH,
    get_settings,
    load_run_config,
    load_settings,
    reset_settings,
)
from .models import (
    AlphaConfig,
    CltConfig,
    ExecutionSettings,
    Experiment,
    GeneratorConfig,
    LevyConfig,
    LoggingSettings,
    OsdConfig,
    ProcessConfig,
    RunConfig,
    Settings,
    VerifyConfig,
)

__all__ = [
    # Models
    "AlphaConfig",
    "CltConfig",
    "ExecutionSettings",
    "Experiment",
    "GeneratorConfig",
    "LevyConfig",
    "LoggingSettings",
    "OsdConfig",
    "ProcessConfig",
    "RunConfig",
    "Settings",
    "VerifyConfig",
    # Functions
    "load_config_file",
    "save_config_file",
    "parse_flat",
    "render_flat",
    "load_run_config",
    "load_settings",
    "get_settings",
    "reset_settings",
    "DEFAULT_CONFIG_PATH",
]
