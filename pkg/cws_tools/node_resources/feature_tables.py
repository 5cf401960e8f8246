# -*- coding: utf-8 -*-
"""Access to the YAML default tables shipped in ``cws_tools/feature_lists``."""

import copy
import os
from functools import lru_cache
from typing import Any, Dict, Mapping

import yaml

from ..errors import ConfigError

FEATURE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "feature_lists")


@lru_cache(maxsize=None)
def _load(name: str) -> Dict[str, Any]:
    path = os.path.join(FEATURE_DIR, f"{name}.yaml")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"missing default table '{name}': {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"default table '{name}' must be a mapping")
    return data


def load_feature_table(name: str, section: str = "") -> Dict[str, Any]:
    """Return a private copy of a default table, optionally one task section of it."""
    data = _load(name)
    if section:
        if section not in data:
            raise ConfigError(f"default table '{name}' has no section '{section}'")
        data = data[section]
    return copy.deepcopy(data)


def overlay(defaults: Mapping[str, Any], overrides: Mapping[str, Any], where: str) -> Dict[str, Any]:
    """Overlay user overrides on defaults, rejecting keys the defaults do not know."""
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")
    merged = dict(defaults)
    merged.update(overrides)
    return merged
