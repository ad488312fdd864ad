"""
Exception hierarchy shared by every calabi_lab module.
"""

from typing import Optional


class CalabiLabError(Exception):
    """Base class for all laboratory failures."""


class DomainError(CalabiLabError, ValueError):
    """Input outside the domain of an operation."""


class QuadratureError(CalabiLabError):
    """Quadrature did not converge or a tail could not be certified."""


class MetricDegenerationError(CalabiLabError):
    """The composite (1,1)-form stopped being positive."""

    def __init__(self, message: str, z: Optional[float] = None, value: Optional[float] = None):
        super().__init__(message)
        self.z = z
        self.value = value


class AliasingError(CalabiLabError):
    """A sampled field carries energy at the Nyquist frequency of its grid."""


class SpectralTruncationError(CalabiLabError):
    """Mode coefficients do not decay across the retained spectrum."""


class ConvergenceError(CalabiLabError):
    """Newton iteration failed; the partial trace is attached."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class FitError(CalabiLabError):
    """Decay fit window is too short or has too few usable samples."""
