#!/usr/bin/env python3
"""
ergokde runtime configuration

Settings that are not part of an experiment (threads, log and cache
locations) come from environment variables, optionally seeded from a .env
file. Experiment parameters live in the JSON config parsed by cli_io.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # python-dotenv not installed, rely on system env variables

from .errors import ConfigError


SCHEMA_FILE = Path(__file__).resolve().parent / "config_schema.json"


class Config:
    """ergokde runtime settings from environment variables."""

    # Parallelism
    THREADS: int = 1
    MAX_DEFAULT_THREADS: int = 4

    # Logging settings
    LOGS_DIR: Path = Path("Logs")
    LOG_FILE: str = "ergokde.log"
    RUN_LOG_FILE: str = "runs.log"
    LOG_LEVEL: str = "INFO"
    MAX_LOG_SIZE_MB: int = 5

    # Pilot reference cache
    CACHE_DIR: Path = Path(".ergokde_cache")

    def __init__(self):
        """Load configuration from environment variables."""
        self._load_env()

    def _load_env(self):
        """Read ERGOKDE_* variables, falling back to class defaults."""
        default_threads = max(1, min(self.MAX_DEFAULT_THREADS, os.cpu_count() or 1))
        raw_threads = os.environ.get("ERGOKDE_THREADS", "")
        if raw_threads.strip():
            try:
                threads = int(raw_threads)
            except ValueError:
                raise ConfigError(f"ERGOKDE_THREADS must be an integer, got {raw_threads!r}",
                                  key="ERGOKDE_THREADS")
            if threads < 1:
                raise ConfigError("ERGOKDE_THREADS must be >= 1", key="ERGOKDE_THREADS")
            self.THREADS = threads
        else:
            self.THREADS = default_threads

        self.LOGS_DIR = Path(os.environ.get("ERGOKDE_LOGS_DIR", str(self.LOGS_DIR)))
        self.CACHE_DIR = Path(os.environ.get("ERGOKDE_CACHE_DIR", str(self.CACHE_DIR)))
        self.LOG_LEVEL = os.environ.get("ERGOKDE_LOG_LEVEL", self.LOG_LEVEL).upper()

    @property
    def log_path(self) -> Path:
        return self.LOGS_DIR / self.LOG_FILE

    @property
    def run_log_path(self) -> Path:
        return self.LOGS_DIR / self.RUN_LOG_FILE

    def to_dict(self) -> Dict[str, Any]:
        """Settings snapshot for the run ledger."""
        return {
            "threads": self.THREADS,
            "logs_dir": str(self.LOGS_DIR),
            "cache_dir": str(self.CACHE_DIR),
            "log_level": self.LOG_LEVEL,
        }


# Singleton instance
_config_instance: Optional[Config] = None


def get_config() -> Config:
    """Get the configuration singleton."""
    global _config_instance
    if _config_instance is None:
        _config_instance = Config()
    return _config_instance


def reset_config():
    """Drop the singleton so the next get_config() re-reads the environment."""
    global _config_instance
    _config_instance = None
