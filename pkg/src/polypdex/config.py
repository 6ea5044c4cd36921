"""Pipeline configuration: one JSON document that captures a full run.

Flags may override individual values, but the merged document is validated
against the default schema first; unknown keys are rejected outright so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "synth": {
        "image_size": 32,
        "patch_size": 8,
        "num_instances": 200,
        "num_classes": 2,
        "views_per_instance": 2,
        "min_mask_fraction": 0.02,
        "max_mask_fraction": 0.6,
    },
    "masking": {
        "ratio": 0.75,
        "fg_threshold": 0.25,
        "fg_slope": 1.0,
        "fg_floor": 0.1,
    },
    "loss": {
        "temperature": 0.05,
        "entropy_weight": 1.0,
        "recon_weight": 1.0,
        "entropy_floor": 1e-6,
        "entropy_over_all_views": False,
    },
    "train": {
        "epochs": 30,
        "batch_size": 16,
        "learning_rate": 0.05,
        "momentum": 0.9,
        "hidden_dim": 64,
        "embed_dim": 256,
    },
    "hash": {
        "leaf_capacity": 32,
        "pole_sample": 64,
    },
    "knn": {
        "k": 5,
        "metric": "hamming",
        "positive_class": 2,
    },
    "eval": {
        "folds": 5,
    },
    "serve": {
        "host": "127.0.0.1",
        "port": 8080,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    merged = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where} must be an object")
            merged[key] = _merge(base[key], value, where)
        else:
            if isinstance(value, dict):
                raise ConfigError(f"config key {where} must be a scalar")
            if isinstance(base[key], bool) != isinstance(value, bool):
                raise ConfigError(f"config key {where} has the wrong type")
            if not isinstance(value, (type(base[key]), int, float, str, bool)):
                raise ConfigError(f"config key {where} has the wrong type")
            merged[key] = value
    return merged


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid with a JSON file, overlaid with flag overrides."""
    config = DEFAULT_CONFIG
    if path is not None:
        raw = Path(path).read_text()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        config = _merge(config, doc)
    if overrides:
        config = _merge(config, overrides)
    return config
