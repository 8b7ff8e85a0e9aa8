"""Settings and run-configuration loading logic."""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from osdmix.config.file_io import load_config_file, set_dotted
from osdmix.config.models import RunConfig, Settings
from osdmix.utils.errors import ConfigurationError, InvalidConfigError
from osdmix.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("default_config.yaml")


def _validation_details(error: ValidationError) -> Dict[str, Any]:
    return {
        ".".join(str(part) for part in item["loc"]) or "config": item["msg"]
        for item in error.errors()
    }


def load_run_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a RunConfig.

    Precedence (highest first):
    1. `overrides`, keyed by dotted paths (``process.variant``), from CLI flags
    2. Values from the configuration file
    3. Default values defined in the RunConfig models

    Raises:
        MissingConfigError: If the configuration file does not exist.
        InvalidConfigError: If the merged configuration does not validate.
    """
    config_dict: Dict[str, Any] = {}
    if config_file is not None:
        config_dict = load_config_file(config_file)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            set_dotted(config_dict, dotted, value)

    try:
        config = RunConfig.model_validate(config_dict)
    except ValidationError as e:
        raise InvalidConfigError(
            "Invalid run configuration", details=_validation_details(e)
        ) from e
    logger.debug("resolved run configuration", experiment=config.experiment.value, seed=config.seed)
    return config


def load_settings() -> Settings:
    """
    Load ambient settings from OSDMIX_* environment variables.

    Raises:
        ConfigurationError: If the environment holds invalid values.
    """
    try:
        return Settings()
    except ValidationError as e:
        raise ConfigurationError(
            "Invalid environment settings", details=_validation_details(e)
        ) from e


# --- Singleton Access ---
_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Loads and returns the global Settings instance (singleton).

    Loads the settings on the first call and caches the instance
    for subsequent calls.
    """
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = load_settings()
    return _settings_instance


def reset_settings() -> None:
    """Drop the cached Settings so the next access re-reads the environment."""
    global _settings_instance
    _settings_instance = None
