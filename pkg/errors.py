"""Exception hierarchy for orthoglass."""
from typing import Optional


class OrthoglassError(Exception):
    """Base class for all library errors."""


class ConfigError(OrthoglassError, ValueError):
    """Experiment configuration failed schema validation."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.field = field
        self.line = line


class NumericDomainError(OrthoglassError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ZeroVariance(NumericDomainError):
    """Spectral law has (numerically) zero variance and cannot be standardized."""


class DomainError(NumericDomainError):
    """Transform or functional evaluated outside its domain."""


class InfeasibleAlpha(NumericDomainError):
    """Rank-1 HCIZ norm ratio outside the feasible range."""


class SingularGram(NumericDomainError):
    """Rank-2 HCIZ Gram matrix is not positive definite."""


class QuadratureOverflow(NumericDomainError):
    """Requested quadrature order exceeds the supported maximum."""


class TooLarge(NumericDomainError):
    """Exact enumeration requested beyond the size guard."""


class NumericFailure(OrthoglassError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, residual: Optional[float] = None, last_iterate=None):
        super().__init__(message)
        self.residual = residual
        self.last_iterate = last_iterate


class NoConvergence(NumericFailure):
    """Fixed-point or root solver hit its iteration cap."""


class BarrierStall(NumericFailure):
    """Feasibility line search could not make progress."""
