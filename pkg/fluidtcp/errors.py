"""
Exception types shared by every fluidtcp module.

Exit-code contract used by the command line:
- DomainError and its subclasses  -> 2
- NumericError                    -> 3
- anything else                   -> 4
"""

from __future__ import annotations

from typing import Any


class FluidModelError(Exception):
    """Base class. `details` carries diagnostics for the error report."""

    exit_code = 4

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details


class DomainError(FluidModelError, ValueError):
    exit_code = 2


class ScenarioError(DomainError):
    """Malformed scenario file. `field` names the offending path, e.g. `loss.buffer_pkts`."""

    def __init__(self, message: str, field: str | None = None, **details: Any) -> None:
        super().__init__(message, field=field, **details)
        self.field = field


class ConfigurationError(DomainError):
    pass


class NumericError(FluidModelError, ArithmeticError):
    exit_code = 3
