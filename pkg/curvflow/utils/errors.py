"""Exception hierarchy. Every error a command can surface maps to one exit code."""

from typing import Any, List, Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_NUMERICAL = 4


class CurvflowError(RuntimeError):
    exit_code = EXIT_NUMERICAL


class ConfigError(CurvflowError):
    """Malformed or inconsistent run configuration."""

    exit_code = EXIT_CONFIG


class CurvatureSpecError(ConfigError, ValueError):
    pass


class RegimeError(CurvflowError):
    """Exponents or psi outside every admissible regime; the message names the hypothesis."""

    exit_code = EXIT_REGIME


class GridError(CurvflowError, ValueError):
    exit_code = EXIT_CONFIG


class ShapeError(CurvflowError, ValueError):
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message)
        self.node = node


class ScheduleError(CurvflowError, ValueError):
    exit_code = EXIT_CONFIG


class NumericalError(CurvflowError):
    """Failure during time stepping. Carries the step, the offending node and the partial history."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, step: Optional[int] = None, node: Optional[int] = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.node = node
        self.history: List[Any] = []


class ConeError(NumericalError):
    """A curvature tuple left the admissible cone."""

    def __init__(self, message: str, node: Optional[int] = None, values: Any = None):
        super().__init__(message, node=node)
        self.values = values


class AuditFailure(CurvflowError):
    def __init__(self, prop: str, witness: Any, detail: str = ""):
        super().__init__(f"{prop} violated at {witness!r} {detail}".rstrip())
        self.prop = prop
        self.witness = witness
