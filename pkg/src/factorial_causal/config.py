"""Flat dotted-key configuration files with typed access.

Files hold one ``section.key=value`` pair per line; ``#`` starts a
comment. Command-line flags override file values, which override
built-in defaults. Values stay strings until a typed getter parses them,
so error messages can point at the offending key.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError


class Config:
    def __init__(self, values: dict | None = None):
        self._values: dict[str, str] = dict(values or {})

    @classmethod
    def from_file(cls, path) -> "Config":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls(values)

    def merged_with(self, overrides: dict) -> "Config":
        """New config with ``overrides`` winning; None values are skipped."""
        merged = dict(self._values)
        for key, value in overrides.items():
            if value is not None:
                merged[key] = str(value)
        return Config(merged)

    def resolved(self) -> dict:
        """Plain dict snapshot for embedding into reports."""
        return dict(sorted(self._values.items()))

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def get_str(self, key: str, default=None) -> str:
        if key not in self._values:
            if default is None:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        return self._values[key]

    def get_int(self, key: str, default=None) -> int:
        raw = self.get_str(key, None if default is None else str(default))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {raw!r}")

    def get_float(self, key: str, default=None) -> float:
        raw = self.get_str(key, None if default is None else repr(float(default)))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {raw!r}")

    def get_bool(self, key: str, default=None) -> bool:
        raw = self.get_str(key, None if default is None else str(default)).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} must be a boolean, got {raw!r}")

    def get_floats(self, key: str, default=None) -> np.ndarray:
        if key not in self._values and default is not None:
            return np.asarray(default, dtype=float)
        raw = self.get_str(key)
        try:
            return np.array([float(v) for v in raw.split(",") if v.strip() != ""])
        except ValueError:
            raise ConfigError(f"config key {key!r} must be comma-joined numbers")

    def get_ints(self, key: str, default=None) -> tuple[int, ...]:
        if key not in self._values and default is not None:
            return tuple(int(v) for v in default)
        raw = self.get_str(key)
        try:
            return tuple(int(v) for v in raw.split(",") if v.strip() != "")
        except ValueError:
            raise ConfigError(f"config key {key!r} must be comma-joined integers")

    def get_matrix(self, key: str, default=None) -> np.ndarray:
        """Semicolon-separated rows of comma-joined numbers."""
        if key not in self._values and default is not None:
            return np.asarray(default, dtype=float)
        raw = self.get_str(key)
        try:
            rows = [
                [float(v) for v in row.split(",")]
                for row in raw.split(";")
                if row.strip() != ""
            ]
            return np.array(rows, dtype=float)
        except ValueError:
            raise ConfigError(
                f"config key {key!r} must be semicolon-joined rows of numbers"
            )
