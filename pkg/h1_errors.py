"""
Exception types shared by the H1 diffusion toolkit.
Each class carries the exit code the command-line interface reports for it.
"""

from typing import Any, Dict


class H1FlowError(Exception):
    """Base class for every failure the toolkit reports on purpose."""

    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form written to stderr by the CLI."""
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ConfigError(H1FlowError, ValueError):
    """Invalid parameters, payloads or grids."""

    exit_code = 2


class DataError(H1FlowError, ValueError):
    """Invalid panels or input files."""

    exit_code = 3


class NumericalError(H1FlowError, ArithmeticError):
    """Nonfinite evaluations and singular root brackets."""

    exit_code = 4
