#!/usr/bin/env python3
"""
ergokde exceptions

Every failure raised by the package derives from ErgoKDEError. Each class
carries the process exit code the CLI reports for it.
"""

from typing import Any, Dict, Optional


class ErgoKDEError(Exception):
    """Base exception for ergokde errors."""

    exit_code: int = 1

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.key = key

    def to_dict(self) -> Dict[str, Any]:
        """Machine-parsable form used for the CLI error line."""
        return {
            "error": type(self).__name__,
            "exit_code": self.exit_code,
            "key": self.key,
            "message": self.message,
        }


class ValidationError(ErgoKDEError):
    """An argument violates the precondition of an operation."""
    pass


class ConfigError(ErgoKDEError):
    """Experiment configuration is malformed; `key` names the offending entry."""
    pass


class ReferenceUnavailableError(ConfigError):
    """No reference density can be produced for a risk experiment."""
    pass


class NumericalError(ErgoKDEError):
    """A numerical routine failed to converge."""
    pass


class SimulationError(ErgoKDEError):
    """Path simulation produced a non-finite state."""

    def __init__(self, message: str, step_index: Optional[int] = None):
        super().__init__(message)
        self.step_index = step_index

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["step_index"] = self.step_index
        return data


class KernelConstructionError(ErgoKDEError):
    """The kernel moment system could not be solved."""
    pass


class DegenerateDataError(ErgoKDEError):
    """Experiment data carry no information (e.g. zero occupation everywhere)."""
    pass


class EmptyBandwidthGridError(ValidationError):
    """The candidate bandwidth grid is empty for the requested horizon."""

    exit_code = 2
