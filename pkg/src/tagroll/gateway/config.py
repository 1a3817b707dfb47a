"""Gateway configuration: file, environment, and flag layers.

Precedence is flags > environment > config file > defaults. The config file
is JSON; environment variables use the ``TAGROLL_`` prefix (see README).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

DEFAULT_LISTEN = "127.0.0.1:8000"

ENV_PREFIX = "TAGROLL_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    listen: str = DEFAULT_LISTEN
    store_dir: str = "tagroll-store"
    reader: Optional[str] = None  # "scenario:<path>" | "tcp:<host>:<port>" | "device:<path>"
    debounce_s: float = 2.0
    per_read_seconds: float = 0.2
    anti_collision: bool = True
    beacon_interval_s: float = 1.0
    sim_speed: float = 0.0  # scenario pacing: 0 = as fast as possible, 1 = real time
    tokens: dict[str, str] = field(default_factory=dict)  # role -> static token
    static_dir: Optional[str] = None  # operator console assets, if built

    def __post_init__(self) -> None:
        for name in ("debounce_s", "per_read_seconds", "beacon_interval_s"):
            if getattr(self, name) <= 0 and name != "debounce_s":
                raise ConfigError(f"{name} must be positive")
        if self.debounce_s < 0:
            raise ConfigError("debounce_s must be non-negative")
        if self.sim_speed < 0:
            raise ConfigError("sim_speed must be non-negative")
        if self.reader is not None:
            kind = self.reader.split(":", 1)[0]
            if kind not in ("scenario", "tcp", "device"):
                raise ConfigError(f"unknown reader source: {self.reader!r}")
        unknown_roles = set(self.tokens) - {"admin", "operator"}
        if unknown_roles:
            raise ConfigError(f"unknown token roles: {sorted(unknown_roles)}")

    @property
    def listen_host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def listen_port(self) -> int:
        try:
            return int(self.listen.rsplit(":", 1)[1])
        except (IndexError, ValueError):
            raise ConfigError(f"listen must be host:port, got {self.listen!r}") from None


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_bool(raw: str, name: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in _BOOL_TRUE:
        return True
    if lowered in _BOOL_FALSE:
        return False
    raise ConfigError(f"{name}: expected a boolean, got {raw!r}")


def _from_file(path: Path) -> dict[str, Any]:
    try:
        raw = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    known = {
        "listen", "store_dir", "reader", "debounce_s", "per_read_seconds",
        "anti_collision", "beacon_interval_s", "sim_speed", "tokens", "static_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _from_env(env: Mapping[str, str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    simple = {
        "LISTEN": "listen",
        "STORE": "store_dir",
        "READER": "reader",
        "STATIC_DIR": "static_dir",
    }
    for suffix, key in simple.items():
        if ENV_PREFIX + suffix in env:
            out[key] = env[ENV_PREFIX + suffix]
    floats = {
        "DEBOUNCE": "debounce_s",
        "PER_READ": "per_read_seconds",
        "BEACON_INTERVAL": "beacon_interval_s",
        "SIM_SPEED": "sim_speed",
    }
    for suffix, key in floats.items():
        if ENV_PREFIX + suffix in env:
            try:
                out[key] = float(env[ENV_PREFIX + suffix])
            except ValueError:
                raise ConfigError(f"{ENV_PREFIX}{suffix} must be a number") from None
    if ENV_PREFIX + "ANTI_COLLISION" in env:
        out["anti_collision"] = _parse_bool(
            env[ENV_PREFIX + "ANTI_COLLISION"], ENV_PREFIX + "ANTI_COLLISION"
        )
    tokens = {}
    for role in ("admin", "operator"):
        var = ENV_PREFIX + "TOKEN_" + role.upper()
        if var in env:
            tokens[role] = env[var]
    if tokens:
        out["tokens"] = tokens
    return out


def load_config(
    config_file: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> GatewayConfig:
    """Merge defaults < file < environment < explicit overrides (flags)."""
    env = os.environ if env is None else env
    merged: dict[str, Any] = {}
    file_path = config_file or env.get(ENV_PREFIX + "CONFIG")
    if file_path:
        merged.update(_from_file(Path(file_path)))
    for key, value in _from_env(env).items():
        if key == "tokens":
            merged["tokens"] = {**merged.get("tokens", {}), **value}
        else:
            merged[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "tokens":
            merged["tokens"] = {**merged.get("tokens", {}), **value}
        else:
            merged[key] = value
    try:
        return GatewayConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
