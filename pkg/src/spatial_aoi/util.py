"""Logging and small shared helpers.

Provides:
    - LogLevel enum: Logging severity levels
    - Logger class: Leveled logger used by every module (and by worker processes)
    - configure_logging(): Global logger setup
    - Path and display utilities: expand_path, ensure_dir, fmt_kv
    - fsum_desc(): compensated summation in descending magnitude
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from datetime import datetime
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterable, Optional, TextIO

import numpy as np


class LogLevel(IntEnum):
    """Logging severity levels (compatible with Python logging module).

    Attributes:
        DEBUG: 10 - Per-realization progress, batch sizes, warmup choices
        INFO: 20 - Sweep points and run summaries
        WARNING: 30 - Capacity overruns, timeouts, clamped settings
        ERROR: 40 - Aborted runs
    """

    DEBUG = 10
    INFO = 20
    WARNING = 30
    ERROR = 40


_LEVEL_NAMES = {
    "debug": LogLevel.DEBUG,
    "info": LogLevel.INFO,
    "warning": LogLevel.WARNING,
    "warn": LogLevel.WARNING,
    "error": LogLevel.ERROR,
}


@dataclass
class Logger:
    """Leveled logger with optional file output and timestamps.

    Attributes:
        level: LogLevel threshold; messages below this level are ignored
        fmt: Format style - "plain" for no timestamps, "time" to include timestamps
        file: Optional open file handle for appending log output

    Example:
        >>> LOG = Logger(level=LogLevel.INFO, fmt="time")
        >>> LOG.info("Sweep over %s: %d point(s)", "r", 5)
        2026-10-18 12:34:56 [=] Sweep over r: 5 point(s)
    """

    level: LogLevel = LogLevel.INFO
    fmt: str = "plain"  # "plain" | "time"
    file: Optional[TextIO] = None

    def _prefix(self, tag: str) -> str:
        if self.fmt == "time":
            ts = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
            return f"{ts} {tag}"
        return tag

    def _write(self, line: str) -> None:
        print(line)
        if self.file:
            try:
                self.file.write(line + "\n")
                self.file.flush()
            except Exception:
                pass

    def _emit(self, threshold: LogLevel, tag: str, msg: str, args: tuple) -> None:
        if self.level <= threshold:
            formatted = msg % args if args else msg
            self._write(f"{self._prefix(tag)} {formatted}")

    def debug(self, msg: str, *args: Any) -> None:
        """Log a debug-level message."""
        self._emit(LogLevel.DEBUG, "[D]", msg, args)

    def info(self, msg: str, *args: Any) -> None:
        """Log an info-level message."""
        self._emit(LogLevel.INFO, "[=]", msg, args)

    def warning(self, msg: str, *args: Any) -> None:
        """Log a warning-level message."""
        self._emit(LogLevel.WARNING, "[!]", msg, args)

    def error(self, msg: str, *args: Any) -> None:
        """Log an error-level message."""
        self._emit(LogLevel.ERROR, "[X]", msg, args)


# Global logger instance used throughout the application.
LOG = Logger()


def configure_logging(
    level: str = "info",
    fmt: str = "plain",
    log_file: Optional[str | Path] = None,
) -> None:
    """Configure the global logger instance.

    Args:
        level: Log level as string: "debug", "info", "warning", "error"
        fmt: Log format - "plain" (no timestamps) or "time" (with timestamps)
        log_file: Optional file path for logging (creates parent dirs automatically)

    Raises:
        ValueError: If level or fmt are invalid

    Example:
        >>> configure_logging(level="debug", fmt="time", log_file="~/.log/spatial-aoi.log")
        >>> LOG.debug("This appears in both stdout and file")
    """
    lvl = _LEVEL_NAMES.get(level.lower())
    if lvl is None:
        raise ValueError(f"Invalid log level: {level!r} (use debug|info|warning|error)")
    if fmt not in ("plain", "time"):
        raise ValueError(f"Invalid log format: {fmt!r} (use plain|time)")

    LOG.level = lvl
    LOG.fmt = fmt

    if log_file:
        path = Path(log_file).expanduser()
        path.parent.mkdir(parents=True, exist_ok=True)
        # pylint: disable=consider-using-with
        LOG.file = path.open("a", buffering=1, encoding="utf-8")
        LOG.debug("Logging to file: %s", path)


def expand_path(p: str | Path) -> Path:
    """Expand ``~`` and environment variables into an absolute path.

    Example:
        >>> expand_path("~/runs/radius.csv")
        PosixPath('/home/user/runs/radius.csv')
    """
    expanded = os.path.expandvars(str(p))
    path = Path(expanded).expanduser()
    return path.resolve(strict=False)


def ensure_dir(p: str | Path) -> Path:
    """Create directory if it doesn't exist and return the expanded path."""
    d = expand_path(p)
    d.mkdir(parents=True, exist_ok=True)
    return d


def fmt_kv(title: str, value: Optional[Any]) -> str:
    """Format a key-value pair for display, treating None as empty.

    Example:
        >>> fmt_kv("Nodes", 3)
        'Nodes: 3'
    """
    return f"{title}: {'' if value is None else value}"


def fsum_desc(terms: Iterable[float]) -> float:
    """Sum terms in descending magnitude with compensated summation.

    Alternating inclusion-exclusion sums cancel heavily; ordering the terms by
    magnitude before ``math.fsum`` keeps the result exact to the last ulp of
    the largest partial sums.
    """
    if isinstance(terms, np.ndarray):
        arr = terms.astype(float).ravel()
    else:
        arr = np.fromiter(terms, dtype=float)
    order = np.argsort(-np.abs(arr), kind="stable")
    return math.fsum(arr[order].tolist())
