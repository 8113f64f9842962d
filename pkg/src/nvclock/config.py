"""Scenario file loading and validation.

A scenario file is a YAML (or JSON) mapping with ``schema_version: 1``.  Every
section is optional; missing keys take the defaults in ``data/default.yaml``.
"""
from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1
_TOP_KEYS = {
    "schema_version", "seed", "constants", "field_G", "temperature_K",
    "readout", "pulses", "scenario", "compare", "sweep", "fit", "allan", "budget",
}


def default_config() -> dict:
    text = resources.files("nvclock").joinpath("data/default.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Read a scenario file and merge it over the defaults."""
    cfg = default_config()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {p} is not valid YAML: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a mapping")
        if user.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {user.get('schema_version')!r}")
        unknown = set(user) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form; stable under key reordering."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
