"""Shared configuration dialect: TOML key/value files with tables.

Every configurable surface (topologies, workloads, node specs, CSV
schemas, scenarios) reads the same dialect so one file can drive the
whole pipeline.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, Any]:
    try:
        return _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None


def load_config(path) -> dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def require(cfg: Mapping, key: str, kind: type | None = None):
    """Fetch a required key, with a readable error naming what is missing."""
    if key not in cfg:
        raise ConfigError(f"missing required config key {key!r}")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"config key {key!r} should be {kind.__name__}, got {type(value).__name__}"
        )
    return value
