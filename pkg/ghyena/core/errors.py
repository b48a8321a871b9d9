"""Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI maps it to, so library code only
raises and ``ghyena.main`` is the single place that turns failures into exit codes.
"""
from typing import Any, Dict, Optional, Sequence


class GHyenaError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ShapeError(GHyenaError, ValueError):
    """Operand shapes are incompatible for an operation."""

    def __init__(self, op: str, *shapes: Sequence[int], reason: str = "incompatible shapes"):
        shape_txt = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: {reason} {shape_txt}")
        self.op = op
        self.shapes = [tuple(s) for s in shapes]


class InvariantViolation(GHyenaError):
    exit_code = 1

    def __init__(self, invariant: str, value: float, tolerance: float, detail: str = ""):
        msg = f"{invariant}: observed {value:.3e}, tolerance {tolerance:.1e}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)
        self.invariant = invariant
        self.value = value
        self.tolerance = tolerance


class DataIOError(GHyenaError):
    exit_code = 2


class NumericalError(GHyenaError):
    exit_code = 3

    def __init__(self, detail: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or {}


class ConfigError(GHyenaError):
    """Configuration file or override that cannot be applied."""

    exit_code = 2
