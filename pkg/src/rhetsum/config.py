"""Flat config files: [section] headers over key = value lines.

Values: quoted strings, integers, floats, true/false, [comma, lists] and
bare strings. Comments start with '#'. One file configures the whole
pipeline; see docs/config-format.md for the recognized sections and keys.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any


class ConfigError(Exception):
    pass


def _parse_scalar(raw: str) -> Any:
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    lowered = raw.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part) for part in inner.split(",")]
    return _parse_scalar(raw)


def load_config(path: str | Path) -> dict[str, dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    sections: dict[str, dict[str, Any]] = {}
    current = sections.setdefault("", {})
    for line_no, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = sections.setdefault(stripped[1:-1].strip(), {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        key, _, raw = stripped.partition("=")
        current[key.strip()] = _parse_value(raw)
    return sections


def require(cfg: dict[str, dict[str, Any]], section: str, key: str) -> Any:
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"missing config key [{section}] {key}")


def get(cfg: dict[str, dict[str, Any]], section: str, key: str, default: Any = None) -> Any:
    return cfg.get(section, {}).get(key, default)
