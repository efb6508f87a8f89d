"""
Pytest configuration and shared fixtures for ergokde tests.
"""
import logging
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from ergokde.config import reset_config  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow Monte Carlo scenario tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def change_to_temp_dir(tmp_path, monkeypatch):
    """Run each test in its own directory with logs and cache kept there."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("ERGOKDE_LOGS_DIR", str(tmp_path / "Logs"))
    monkeypatch.setenv("ERGOKDE_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.delenv("ERGOKDE_THREADS", raising=False)
    reset_config()
    yield
    reset_config()
    # The CLI attaches handlers and stops propagation; undo that for caplog
    package_logger = logging.getLogger("ergokde")
    for handler in list(package_logger.handlers):
        handler.close()
    package_logger.handlers = []
    package_logger.propagate = True
    package_logger.setLevel(logging.NOTSET)


@pytest.fixture
def mock_env_vars(monkeypatch):
    """Set environment variables and drop the cached config."""
    def _mock_env(vars_dict):
        for key, value in vars_dict.items():
            monkeypatch.setenv(key, value)
        reset_config()
        return monkeypatch
    return _mock_env


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_config(tmp_path):
    """Write a JSON config document and return its path."""
    import json

    def _write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write
