"""
Environment and config-file resolution.
"""

import dataclasses
import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

from src.errors import ConfigError

OUTPUT_ROOT_VAR = "COLLISION_TOOLKIT_OUTPUT_ROOT"
LOG_LEVEL_VAR = "COLLISION_TOOLKIT_LOG_LEVEL"
REANNOTATION_DIR_VAR = "COLLISION_TOOLKIT_REANNOTATION_DIR"

DEFAULT_OUTPUT_ROOT = "runs"

# Local development reads a .env file; real environment variables win.
load_dotenv()


def get_env_var(var_name: str, default: Optional[str] = None) -> Optional[str]:
    """Get an environment variable, treating empty values as unset."""
    value = os.getenv(var_name)
    return value if value else default


def output_root() -> Path:
    return Path(get_env_var(OUTPUT_ROOT_VAR, DEFAULT_OUTPUT_ROOT))


def load_config_file(path: Path) -> Dict[str, str]:
    """
    Read a flat ``key=value`` config file.

    Args:
        path: Path to the config file

    Returns:
        Mapping of keys to raw string values, in file order
    """
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {key: value for key, value in values.items() if value is not None}


def _coerce(raw: str, current):
    if isinstance(current, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, (tuple, frozenset)):
        if any(isinstance(item, tuple) for item in current):
            raise ValueError("nested values cannot be set from a flat file")
        items = [item.strip() for item in raw.split(",") if item.strip()]
        if current and all(isinstance(item, float) for item in current):
            items = [float(item) for item in items]
        return type(current)(items)
    return raw


def apply_overrides(config, values: Dict[str, str]):
    """
    Return a copy of a config dataclass with string values coerced onto its fields.

    Unknown keys are ignored so one file can carry several config sections.
    """
    known = {field.name for field in dataclasses.fields(config)}
    changes = {}
    for key, raw in values.items():
        name = key.strip().lower().replace("-", "_")
        if name not in known:
            continue
        current = getattr(config, name)
        try:
            changes[name] = _coerce(raw, current) if current is not None else float(raw)
        except ValueError as e:
            raise ConfigError(f"config key '{key}': {e}") from e
    return dataclasses.replace(config, **changes)
