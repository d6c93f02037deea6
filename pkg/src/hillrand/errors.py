"""Exception types shared across the package.

Validation problems (bad configs, malformed input files) raise ConfigError
or DomainError; numerical failures at runtime raise the remaining types.
The CLI maps the first group to exit code 2 and the second to exit code 1.
"""


class HillError(Exception):
    """Base class for all package errors."""


class DomainError(HillError, ValueError):
    """Input outside the mathematical domain (t outside the cycle, lambda <= 0, ...)."""


class ConfigError(HillError, ValueError):
    """Invalid or incomplete run configuration."""


class DegenerateBaseError(HillError):
    """Zeroth-order matrix elements too close to a degenerate limit."""


class DegenerateMomentsError(HillError):
    """Moment system I1*J2 - I2*J1 is numerically singular."""


class SingularMapError(HillError):
    """Transfer-matrix construction with |g| below threshold."""


class NotEllipticError(HillError):
    """Matrix is outside the elliptic (|h| < 1) regime."""


class UnsupportedFormError(HillError):
    """Operation not defined for the requested noise form."""


class GridMismatchError(HillError):
    """Noise path and dense cycle output live on different grids."""


class InsufficientTraceError(HillError):
    """Orbit trace does not span enough turning points."""


class AccuracyError(HillError):
    """Integrator or product chain failed to meet its accuracy contract."""
