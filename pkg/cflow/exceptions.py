"""
Exception hierarchy shared by every cflow module.

Callers that only care "did cflow reject this" catch CFlowError; the CLI maps the
concrete classes onto exit codes.
"""

from typing import Any, Optional


class CFlowError(Exception):
    """Root of all cflow errors."""


class FieldError(CFlowError, ValueError):
    """Bad lattice data: non-finite values, wrong shapes, axis out of range."""


class GeometryError(CFlowError, ValueError):
    """Invalid metric data (not positive-definite, bad volume, overflow)."""


class ChartError(CFlowError, ValueError):
    """A target point left its chart (or came within the guard of the boundary)."""


class UnsupportedError(CFlowError, NotImplementedError):
    """Requested combination is valid input but not implemented (e.g. IMEX on curved g)."""


class ConfigError(CFlowError):
    """Config file could not be parsed or failed validation; message names the field."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class FlowDiverged(CFlowError):
    """The discrete flow left the chart or produced NaN; carries the last valid state."""

    def __init__(self, message: str, state: Any = None):
        super().__init__(message)
        self.state = state


class ExpressionError(CFlowError, ValueError):
    """A conformal-factor expression failed to parse or uses a forbidden construct."""
