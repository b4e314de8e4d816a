"""
Exception hierarchy shared by every rigidlab module.
"""

from typing import Optional, Sequence

import numpy as np


class RigidLabError(Exception):
    """Base class for all rigidlab errors."""

    pass


class PhaseSpaceError(RigidLabError):
    """Malformed phase-space point or dimension mismatch."""

    pass


class DomainError(RigidLabError):
    """Point outside a domain, or a value that cannot be evaluated there."""

    pass


class KinkPointError(RigidLabError):
    """The gradient is undefined at this point (kink of abs/min/max)."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point, dtype=float)


class DifferentiationError(RigidLabError):
    """The requested derivative order is not available for this field."""

    pass


class ParseError(RigidLabError):
    """Syntax or semantic error in a Hamiltonian expression."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class IntegratorError(RigidLabError):
    """Flow integration, inversion or reconstruction failure."""

    pass


class GFQIError(RigidLabError):
    """Invalid generating function or equivalence move."""

    pass


class MinMaxError(RigidLabError):
    """Min-max value cannot be extracted from the filtration."""

    pass


class WeakBracketError(RigidLabError):
    """Set-valued field or bracket cannot be sampled."""

    pass


class RigidityError(RigidLabError):
    """Rigidity experiment precondition violated."""

    pass


class ConfigError(RigidLabError):
    """Experiment configuration is invalid."""

    def __init__(self, message: str, violations: Optional[Sequence[str]] = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + ": " + "; ".join(self.violations)
        super().__init__(message)
