from .exceptions import (
    CrrError,
    ConfigError,
    DataError,
    NumericError,
    ReplicationQualityError,
)
from .config import Settings
from .logging import get_logger

__all__ = [
    "CrrError",
    "ConfigError",
    "DataError",
    "NumericError",
    "ReplicationQualityError",
    "Settings",
    "get_logger",
]
