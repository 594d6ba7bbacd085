"""Exception hierarchy shared by the library and the CLI.

Every error carries an ``exit_code`` so the CLI can map failures to process
status the same way the HTTP layer maps them to status codes, and a
``details`` dict that goes straight into the structured log record.
"""
from typing import Any, Dict, Optional


class KRLError(Exception):
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_log(self, **extra: Any) -> Dict[str, Any]:
        """Fields for ``log_json``; never shadows its positional arguments."""
        data = {k: v for k, v in self.details.items() if _loggable(v) and k not in _RESERVED}
        data.update(extra)
        data.update(error=type(self).__name__, error_message=self.message)
        return data


_RESERVED = frozenset({"level", "message", "component"})


def _loggable(value: Any) -> bool:
    return isinstance(value, (str, int, float, bool)) or value is None


# --- configuration / construction errors (exit 2) ---

class ConfigError(KRLError):
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, **details: Any):
        super().__init__(message, line=line, **details)
        self.line = line


class DimensionMismatch(KRLError):
    exit_code = 2


class NegativeEntry(ConfigError):
    pass


# --- solver errors (exit 3) ---

class SolverError(KRLError):
    exit_code = 3


class NotInCone(SolverError):
    pass


class NoHConstant(SolverError):
    pass


class EvaluationFailure(SolverError):
    pass


class ZeroImage(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, message: str, iterate=None, residual: float = float("nan"), trace=None, **details: Any):
        super().__init__(message, residual=residual, **details)
        self.iterate = iterate
        self.residual = residual
        self.trace = trace


class ResidualTooLarge(SolverError):
    def __init__(self, message: str, pair=None, trace=None, **details: Any):
        super().__init__(message, **details)
        self.pair = pair
        self.trace = trace


class PolicyCycle(EvaluationFailure):
    pass


class BracketFailure(SolverError):
    pass
