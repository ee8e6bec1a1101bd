"""Logging facade for cheapet.

A class-level ``Debug`` object configures the ``cheapet`` parent logger once
(console plus optional log file) so every ``logging.getLogger(__name__)``
in the package inherits the chosen level and handlers.

Debug Levels:
    - DEBUG_OFF (0): console shows only critical messages, no log file
    - DEBUG_ERROR (1): errors
    - DEBUG_INFO (2): errors, warnings and progress (calibration, ledger, ...)
    - DEBUG_VERBOSE (3): everything, including per-request routing decisions
      and the calling ``[Class.function]`` prefix

Usage:
    Debug.init(debug_level=Debug.level_from_name("info"), app_name="cheapet")
    sys.excepthook = Debug.exception_hook
"""

from __future__ import annotations

import inspect
import logging
import os
import sys
import tempfile
import traceback
from datetime import datetime
from typing import Optional


class Debug:
    """Central logging configuration and convenience log functions.

    Attributes:
        logger: The configured ``cheapet`` logger (None before ``init``).
        DEBUG_LEVEL: Current debug level (0-3).
        LOG_FILE: Path of the log file, if one is written.
    """

    DEBUG_OFF = 0
    DEBUG_ERROR = 1
    DEBUG_INFO = 2
    DEBUG_VERBOSE = 3

    LEVEL_NAMES = {
        "off": DEBUG_OFF,
        "error": DEBUG_ERROR,
        "info": DEBUG_INFO,
        "verbose": DEBUG_VERBOSE,
    }

    DEBUG_LEVEL = DEBUG_OFF
    LOG_FILE: Optional[str] = None
    logger: Optional[logging.Logger] = None

    @classmethod
    def level_from_name(cls, name: str) -> int:
        """Map ``off|error|info|verbose`` to a debug level (unknown -> off)."""
        return cls.LEVEL_NAMES.get(str(name).strip().lower(), cls.DEBUG_OFF)

    @classmethod
    def init(
        cls,
        debug_level: int = DEBUG_OFF,
        log_dir: Optional[str] = None,
        app_name: str = "cheapet",
        log_to_file: bool = False,
    ) -> None:
        """Configure the ``cheapet`` logger.

        Args:
            debug_level: Debug level (0-3).
            log_dir: Directory for the log file; defaults to
                ``<tmp>/cheapet_logs``.
            app_name: Used in the log file name.
            log_to_file: Also write a timestamped log file (never at level OFF).
        """
        cls.DEBUG_LEVEL = debug_level
        cls.logger = logging.getLogger("cheapet")
        cls.logger.setLevel(logging.DEBUG)
        cls.logger.propagate = False
        cls.logger.handlers.clear()

        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        console.setLevel(
            {
                cls.DEBUG_VERBOSE: logging.DEBUG,
                cls.DEBUG_INFO: logging.INFO,
                cls.DEBUG_ERROR: logging.ERROR,
            }.get(min(debug_level, cls.DEBUG_VERBOSE), logging.CRITICAL)
        )
        cls.logger.addHandler(console)

        cls.LOG_FILE = None
        if debug_level == cls.DEBUG_OFF or not log_to_file:
            return

        directory = log_dir or os.path.join(tempfile.gettempdir(), "cheapet_logs")
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as exc:
            cls.logger.error("Cannot create log directory %s: %s", directory, exc)
            return

        safe_name = app_name.replace(" ", "_")
        cls.LOG_FILE = os.path.join(
            directory, f"{datetime.now().strftime('%Y-%m-%d_%H-%M-%S')}_{safe_name}.txt"
        )
        file_handler = logging.FileHandler(cls.LOG_FILE, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s: %(message)s")
        )
        file_handler.setLevel(logging.DEBUG)
        cls.logger.addHandler(file_handler)
        cls.info(f"Log file created: {cls.LOG_FILE}")

    @classmethod
    def _emit(cls, level: int, message: str, exc_info: object = None) -> None:
        if cls.DEBUG_LEVEL >= cls.DEBUG_VERBOSE:
            message = f"{cls._get_caller_info()} {message}"
        logger = cls.logger or logging.getLogger("cheapet")
        logger.log(level, message, exc_info=bool(exc_info))

    @classmethod
    def error(cls, message: str, exc_info: object = None) -> None:
        cls._emit(logging.ERROR, message, exc_info)

    @classmethod
    def warning(cls, message: str) -> None:
        cls._emit(logging.WARNING, message)

    @classmethod
    def info(cls, message: str) -> None:
        cls._emit(logging.INFO, message)

    @classmethod
    def debug(cls, message: str) -> None:
        cls._emit(logging.DEBUG, message)

    @classmethod
    def critical(cls, message: str) -> None:
        cls._emit(logging.CRITICAL, message)

    @classmethod
    def exception_hook(cls, exc_type, exc_value, exc_traceback) -> None:
        """``sys.excepthook`` replacement: log, then defer to the default hook."""
        error_msg = "".join(traceback.format_exception(exc_type, exc_value, exc_traceback))
        cls.critical(f"UNEXPECTED: {error_msg}")
        sys.__excepthook__(exc_type, exc_value, exc_traceback)

    @classmethod
    def _get_caller_info(cls) -> str:
        """Return ``[Class.function]`` of the code that called the facade."""
        stack = inspect.stack()
        # 0: this method, 1: _emit, 2: error/info/..., 3: the caller
        if len(stack) <= 3:
            return ""
        caller = stack[3]
        instance = caller.frame.f_locals.get("self")
        if instance is not None:
            return f"[{instance.__class__.__name__}.{caller.function}]"
        return f"[{caller.function}]"
