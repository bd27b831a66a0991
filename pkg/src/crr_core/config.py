from __future__ import annotations

import os
from dataclasses import dataclass

from .exceptions import ConfigError


def _env(name: str, default: str | None = None) -> str | None:
    val = os.getenv(name, default)
    if val is None:
        return None
    val = val.strip()
    return val if val else None


def _env_int(name: str, default: int) -> int:
    raw = _env(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from e


def _env_float(name: str, default: float) -> float:
    raw = _env(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from e


@dataclass(frozen=True)
class Settings:
    """
    Process-wide defaults. Only the CLI reads them; library calls take explicit arguments.
    """
    env: str = "dev"
    log_level: str = "INFO"
    parallel: int = 1
    ghat_floor: float = 1e-10
    quadrature: int = 16
    draws: int = 1000

    def __post_init__(self) -> None:
        if self.parallel < 1:
            raise ConfigError(f"CRR_PARALLEL must be >= 1, got {self.parallel}")
        if not 0 < self.ghat_floor < 1:
            raise ConfigError(f"CRR_GHAT_FLOOR must lie in (0, 1), got {self.ghat_floor}")
        if self.quadrature < 1:
            raise ConfigError(f"CRR_QUADRATURE must be >= 1, got {self.quadrature}")

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            env=_env("CRR_ENV", "dev") or "dev",
            log_level=_env("CRR_LOG_LEVEL", "INFO") or "INFO",
            parallel=_env_int("CRR_PARALLEL", 1),
            ghat_floor=_env_float("CRR_GHAT_FLOOR", 1e-10),
            quadrature=_env_int("CRR_QUADRATURE", 16),
            draws=_env_int("CRR_DRAWS", 1000),
        )
