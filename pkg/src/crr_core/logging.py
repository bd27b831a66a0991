from __future__ import annotations

import logging
import sys
from typing import Optional

ROOT = "crr"

_handler: Optional[logging.Handler] = None


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is when the record is emitted."""

    def emit(self, record: logging.LogRecord) -> None:
        self.stream = sys.stderr
        super().emit(record)


def _install() -> None:
    """One stderr handler on the ``crr`` logger; stdout is reserved for reports."""
    global _handler
    if _handler is not None:
        return
    _handler = _StderrHandler()
    fmt = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
    _handler.setFormatter(logging.Formatter(fmt))
    root = logging.getLogger(ROOT)
    root.addHandler(_handler)
    root.setLevel(logging.INFO)
    root.propagate = False


def get_logger(name: str = ROOT, level: Optional[str] = None) -> logging.Logger:
    _install()
    logger = logging.getLogger(name)
    if level:
        resolved = logging.getLevelName(level.upper())
        logger.setLevel(resolved if isinstance(resolved, int) else logging.INFO)
    return logger
