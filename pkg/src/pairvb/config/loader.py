from pathlib import Path
import json

import yaml

from pairvb.core.errors import ConfigError

_YAML_SUFFIXES = {".yaml", ".yml"}


def load_config(path) -> dict:
    """
    Load a JSON or YAML configuration file and return it as a dict.

    The format is chosen by file suffix; anything that is not
    ``.yaml``/``.yml`` is read as JSON.
    """
    path = Path(path)

    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with path.open("r", encoding="utf-8") as f:
        try:
            if path.suffix.lower() in _YAML_SUFFIXES:
                config = yaml.safe_load(f)
            else:
                config = json.load(f)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse config file {path}: {e}") from e

    if config is None:
        return {}

    if not isinstance(config, dict):
        raise ConfigError(f"Config file {path} must hold a mapping")

    return config


def save_config(config: dict, path) -> None:
    """
    Save a configuration dict as JSON or YAML (by suffix).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf-8") as f:
        if path.suffix.lower() in _YAML_SUFFIXES:
            yaml.safe_dump(config, f, sort_keys=False)
        else:
            json.dump(
                config,
                f,
                indent=4,
                ensure_ascii=False,
            )
