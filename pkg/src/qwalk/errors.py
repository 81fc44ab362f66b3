"""Exception types raised by qwalk."""


class QWalkError(Exception):
    """Base class for all qwalk errors."""


class LatticeBoundsError(QWalkError):
    """Amplitude would leave the preallocated lattice."""


class DivergentRateError(QWalkError, ValueError):
    """The asymptotic spreading rate is undefined (coherent regime, p in {0, 1})."""


class QuadratureSingularityError(QWalkError, ArithmeticError):
    """I - M_k is singular at a quadrature node."""


class WindowTooShortError(QWalkError, ValueError):
    """Regression window holds too few samples."""


class DimensionGuardError(QWalkError, MemoryError):
    """Exact density-matrix evolution would exceed the configured dimension."""


class ConfigError(QWalkError, ValueError):
    """Invalid run or ensemble configuration."""
