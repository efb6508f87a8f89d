#!/usr/bin/env python3
"""
ergokde logging

Library modules only call logging.getLogger("ergokde.<module>"). The CLI
calls setup_logging() once, which attaches a rotating file handler and a
console handler to the "ergokde" logger. RunLog keeps a JSON-lines ledger
of CLI invocations.
"""

import json
import logging
import sys
import threading
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

from .config import Config, get_config


LOGGER_NAME = "ergokde"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(config: Config = None, console: bool = True) -> logging.Logger:
    """
    Configure the package logger.

    Args:
        config: Runtime configuration (uses singleton if not provided)
        console: Also log to stderr

    Returns:
        logging.Logger: The "ergokde" logger
    """
    config = config or get_config()
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(getattr(logging, config.LOG_LEVEL, logging.INFO))

    # Clear existing handlers
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers = []

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    try:
        config.LOGS_DIR.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(
            config.log_path,
            maxBytes=config.MAX_LOG_SIZE_MB * 1024 * 1024,
            backupCount=3,
            encoding="utf-8",
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    except OSError as e:
        print(f"[ERROR] Cannot open log file {config.log_path}: {e}", file=sys.stderr)

    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    logger.propagate = False
    return logger


class RunLog:
    """Appends one JSON object per CLI invocation to runs.log."""

    def __init__(self, log_file: Optional[Path] = None):
        self.log_file = Path(log_file) if log_file else get_config().run_log_path
        self._lock = threading.Lock()

    def record(self, command: str, status: str, exit_code: int,
               details: Dict[str, Any] = None):
        """
        Record a CLI invocation.

        Args:
            command: Subcommand name
            status: "success" or "error"
            exit_code: Process exit status
            details: Additional details (config digest, output path, error)
        """
        entry = {
            "timestamp": datetime.now().strftime(DATE_FORMAT),
            "command": command,
            "status": status,
            "exit_code": exit_code,
            "details": details or {},
        }
        with self._lock:
            try:
                self.log_file.parent.mkdir(parents=True, exist_ok=True)
                with open(self.log_file, "a", encoding="utf-8") as f:
                    f.write(json.dumps(entry, default=str, sort_keys=True) + "\n")
            except OSError as e:
                print(f"[ERROR] Failed to write run log: {e}", file=sys.stderr)

    def read(self) -> list:
        """Return all recorded entries, skipping unreadable lines."""
        if not self.log_file.exists():
            return []
        entries = []
        with open(self.log_file, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    continue
        return entries
