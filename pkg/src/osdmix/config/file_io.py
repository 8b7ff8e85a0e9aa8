"""Configuration file loading and saving utilities."""

import json
from pathlib import Path
from typing import Any, Dict, Iterator, Tuple, Union

import yaml

from osdmix.utils.errors import ConfigurationError, InvalidConfigError, MissingConfigError

YAML_SUFFIXES = (".yaml", ".yml")
JSON_SUFFIXES = (".json",)
FLAT_SUFFIXES = (".cfg", ".conf", ".ini", ".txt")
SUPPORTED_FORMATS = list(YAML_SUFFIXES + JSON_SUFFIXES + FLAT_SUFFIXES)


def _flatten(config: Dict[str, Any], prefix: str = "") -> Iterator[Tuple[str, Any]]:
    for key, value in config.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict) and value:
            yield from _flatten(value, f"{dotted}.")
        else:
            yield dotted, value


def _parse_value(text: str) -> Any:
    # JSON first so that exponent floats such as 1e-06 stay floats
    try:
        return json.loads(text)
    except ValueError:
        return yaml.safe_load(text)


def set_dotted(config: Dict[str, Any], dotted: str, value: Any) -> None:
    """Assign `value` at a dotted key path, creating intermediate sections."""
    parts = dotted.split(".")
    node = config
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise InvalidConfigError(f"Key {dotted} conflicts with a scalar at {part}")
        node = child
    node[parts[-1]] = value


def render_flat(config: Dict[str, Any]) -> str:
    """
    Render a nested configuration as ``section.key = value`` lines.

    Values are written as JSON, which is also valid YAML flow syntax.
    """
    lines = [f"{key} = {json.dumps(value)}" for key, value in _flatten(config)]
    return "\n".join(lines) + "\n"


def parse_flat(text: str) -> Dict[str, Any]:
    """
    Parse ``section.key = value`` lines into a nested dictionary.

    Blank lines and lines starting with ``#`` or ``;`` are ignored. Values are
    YAML flow scalars or sequences (``process.b = [[0.5, 0.2], [0, 0.3]]``).

    Raises:
        InvalidConfigError: on malformed lines or duplicate keys.
    """
    config: Dict[str, Any] = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InvalidConfigError(
                "Malformed configuration line", details={"line": lineno, "text": raw}
            )
        if key in seen:
            raise InvalidConfigError("Duplicate configuration key", details={"key": key})
        seen.add(key)
        try:
            parsed = _parse_value(value.strip())
        except yaml.YAMLError as e:
            raise InvalidConfigError(
                "Unparseable configuration value", details={"key": key, "error": str(e)}
            ) from e
        set_dotted(config, key, parsed)
    return config


def load_config_file(file_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a configuration file.

    Args:
        file_path: Path to the configuration file.

    Returns:
        The configuration as a dictionary.

    Raises:
        ConfigurationError: If the file cannot be loaded.
        MissingConfigError: If the file does not exist.
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise MissingConfigError(f"Configuration file does not exist: {file_path}")

    suffix = file_path.suffix.lower()
    try:
        text = file_path.read_text(encoding="utf-8")
        if suffix in YAML_SUFFIXES:
            data = yaml.safe_load(text)
        elif suffix in JSON_SUFFIXES:
            data = json.loads(text)
        elif suffix in FLAT_SUFFIXES:
            data = parse_flat(text)
        else:
            raise ConfigurationError(
                f"Unsupported configuration file format: {file_path.suffix}",
                details={"supported_formats": SUPPORTED_FORMATS},
            )
    except ConfigurationError:
        raise
    except yaml.YAMLError as e:
        raise InvalidConfigError(
            f"Failed to parse YAML configuration file: {file_path}", details={"error": str(e)}
        ) from e
    except json.JSONDecodeError as e:
        raise InvalidConfigError(
            f"Failed to parse JSON configuration file: {file_path}", details={"error": str(e)}
        ) from e
    except OSError as e:
        raise ConfigurationError(
            f"Failed to load configuration file: {file_path}", details={"error": str(e)}
        ) from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"Configuration root must be a mapping: {file_path}")
    return data


def save_config_file(config: Dict[str, Any], file_path: Union[str, Path]) -> None:
    """
    Save a configuration to a file, choosing the format by suffix.

    Raises:
        ConfigurationError: If the file cannot be saved.
    """
    file_path = Path(file_path)
    suffix = file_path.suffix.lower()
    if suffix in YAML_SUFFIXES:
        text = yaml.safe_dump(config, default_flow_style=None, sort_keys=False)
    elif suffix in JSON_SUFFIXES:
        text = json.dumps(config, indent=2) + "\n"
    elif suffix in FLAT_SUFFIXES:
        text = render_flat(config)
    else:
        raise ConfigurationError(
            f"Unsupported configuration file format for saving: {file_path.suffix}",
            details={"supported_formats": SUPPORTED_FORMATS},
        )

    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise ConfigurationError(
            f"Failed to save configuration file: {file_path}", details={"error": str(e)}
        ) from e
