# settings.py: environment driven defaults and logging setup
import logging
import os
import sys
from pathlib import Path
from typing import Optional

ENV_OUTPUT_DIR = "DRAGFL_OUTPUT_DIR"
ENV_LOG_LEVEL = "DRAGFL_LOG_LEVEL"
ENV_WORKERS = "DRAGFL_WORKERS"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def load_setting(key: str, default: Optional[str] = None) -> Optional[str]:
    """Read a setting from the environment; blank values count as unset."""
    val = os.environ.get(key)
    if val is None or not val.strip():
        return default
    return val.strip()


def default_output_dir() -> Optional[Path]:
    raw = load_setting(ENV_OUTPUT_DIR)
    return Path(raw).expanduser() if raw else None


def default_workers() -> int:
    raw = load_setting(ENV_WORKERS)
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("%s=%r is not an integer; using 1", ENV_WORKERS, raw)
        return 1
    return max(1, workers)


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stream handler on the root logger.

    Explicit ``level`` wins over ``DRAGFL_LOG_LEVEL``; the default is INFO.
    Calling it twice replaces the handler instead of stacking a second one.
    """
    name = (level or load_setting(ENV_LOG_LEVEL, "INFO")).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_dragfl", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._dragfl = True  # marks our own handler for replacement
    root.addHandler(handler)
    root.setLevel(numeric)
