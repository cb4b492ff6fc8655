"""
Configuration management for the dual-decoding toolkit.

This module handles loading, saving, and overriding configuration settings.
The configuration is one JSON document with the sections subword, model,
training, search, datakit, eval and database.
"""

import logging
import copy
import json
import os

from errors import ConfigError
from model.config import ModelConfig
from search.hypothesis import SearchConfig
from training.trainer import TrainConfig
from utils import atomic_write_text

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# Default configuration file path
CONFIG_FILE = "dualdec_config.json"

# keys whose default is None and may hold a list
_OPTIONAL_LISTS = {("search", "forced1"), ("search", "forced2")}


def get_default_config():
    """
    Create and return default configuration settings.

    Returns:
        dict: Default configuration settings
    """
    search = SearchConfig().to_dict()
    return {
        "subword": {
            "num_merges": 8000,
            "tags": [],
            "shared": True,  # one model for source and targets
        },
        "model": ModelConfig().to_dict(),
        "training": TrainConfig().to_dict(),
        "search": search,
        "datakit": {
            "rep": 3,
            "max_phrase_len": 4,
            "align_iterations": 5,
            "heuristic": "grow-diag-final-and",
            "bidi_mode": "gold",
            "variants": ["A", "B"],
        },
        "eval": {
            "max_n": 4,
            "smoothing": "none",
            "smooth_value": 1.0,
            "symmetric": True,
        },
        "database": {
            "url": "",  # empty falls back to DUALDEC_DATABASE_URL
        },
    }


def _check_value(section, key, value, default):
    if (section, key) in _OPTIONAL_LISTS:
        if value is not None and not (isinstance(value, list) and all(isinstance(v, int) for v in value)):
            raise ConfigError(f"{section}.{key} must be null or a list of token ids")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{section}.{key} must be a list, got {value!r}")
        return value
    return value


def validate_config(config):
    """
    Check a configuration against the default schema.

    Args:
        config (dict): Configuration to check

    Returns:
        dict: The configuration with numbers normalized

    Raises:
        ConfigError: unknown sections or keys, values of the wrong type, or
            settings rejected by the typed views
    """
    if not isinstance(config, dict):
        raise ConfigError("The configuration must be a JSON object")
    defaults = get_default_config()
    for section, values in config.items():
        if section not in defaults:
            raise ConfigError(f"Unknown configuration section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"Configuration section {section!r} must be an object")
        for key, value in values.items():
            if key not in defaults[section]:
                raise ConfigError(f"Unknown setting {section}.{key}")
            values[key] = _check_value(section, key, value, defaults[section][key])

    # the typed views run their own range checks
    model_config(config)
    train_config(config)
    search_config(config)
    return config


def merge_defaults(config):
    """
    Fill in every default key missing from a configuration.

    Handles files written before new options were added.
    """
    merged = get_default_config()
    for section, section_values in (config or {}).items():
        if isinstance(section_values, dict) and isinstance(merged.get(section), dict):
            merged[section].update(section_values)
        else:
            merged[section] = section_values
    return merged


def load_config(path=None):
    """
    Load configuration from file, or the defaults when no file is given.

    Args:
        path (str, optional): JSON configuration file

    Returns:
        dict: Configuration settings

    Raises:
        ConfigError: unreadable file or schema violation
    """
    if path is None:
        return get_default_config()
    if not os.path.exists(path):
        raise ConfigError(f"Configuration file not found: {path}")

    try:
        with open(path, 'r', encoding='utf-8') as f:
            config = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.debug(f"Error loading configuration: {str(e)}")
        raise ConfigError(f"Cannot read configuration {path}: {e}") from e

    if not isinstance(config, dict):
        raise ConfigError(f"{path}: the configuration must be a JSON object")
    config = validate_config(merge_defaults(config))
    logger.info(f"Configuration loaded from {path}")
    return config


def save_config(config, path=CONFIG_FILE):
    """
    Save configuration to file.

    Args:
        config (dict): Configuration to save
        path (str): Destination file

    Returns:
        bool: True if successful, False otherwise
    """
    try:
        atomic_write_text(path, json.dumps(config, indent=4, sort_keys=True) + "\n")
        logger.info(f"Configuration saved to {path}")
        return True

    except Exception as e:
        logger.error(f"Error saving configuration: {str(e)}")
        return False


def _parse_override_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config, overrides):
    """
    Apply "section.key=value" overrides; values are parsed as JSON when possible.

    Args:
        config (dict): Configuration to start from (not modified)
        overrides (list): Override strings, applied in order

    Returns:
        dict: New validated configuration

    Raises:
        ConfigError: malformed override or schema violation
    """
    updated = copy.deepcopy(config)
    for override in overrides or []:
        name, sep, raw = override.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"Override {override!r} is not of the form section.key=value")
        updated.setdefault(section, {})
        if not isinstance(updated[section], dict):
            raise ConfigError(f"Configuration section {section!r} must be an object")
        updated[section][key] = _parse_override_value(raw.strip())
        logger.debug(f"Override {section}.{key} = {updated[section][key]!r}")
    return validate_config(updated)


def model_config(config):
    return ModelConfig.from_dict(dict(config["model"]))


def train_config(config):
    return TrainConfig.from_dict(dict(config["training"]))


def search_config(config):
    return SearchConfig.from_dict(dict(config["search"]))
