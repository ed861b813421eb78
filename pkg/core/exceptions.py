"""
Error hierarchy shared by every app of the project.
"""


class AmpLabError(Exception):
    """Base class for all errors raised by the library."""


class DomainError(AmpLabError, ValueError):
    """An argument lies outside the domain of a transform or denoiser."""


class DimError(AmpLabError, ValueError):
    """Inconsistent or unsupported dimensions."""


class ConfigError(AmpLabError, ValueError):
    """Invalid or unsupported configuration value."""


class SingularFilter(AmpLabError, ArithmeticError):
    """Module A extrinsic division with 1 - eta_A too close to zero."""


class SingularOnsager(AmpLabError, ArithmeticError):
    """Module B extrinsic division with 1 - eta_B/|W| too close to zero."""


class NotPosDef(AmpLabError, ArithmeticError):
    """A covariance message matrix is not positive definite."""

    def __init__(self, ell, message=None):
        self.ell = ell
        super().__init__(
            message or f"covariance matrix of row section {ell} is not positive definite"
        )


class NonConvergence(AmpLabError):
    """An iteration did not reach its tolerance."""


class NumericalError(AmpLabError, ArithmeticError):
    """NaN or Inf appeared in a message."""

    def __init__(self, quantity, iteration=None, message=None):
        self.quantity = quantity
        self.iteration = iteration
        where = "" if iteration is None else f" at iteration {iteration}"
        super().__init__(f"{message or 'non-finite value in'} {quantity}{where}")


class DegenerateBracket(AmpLabError, ValueError):
    """A bisection bracket does not separate the predicate."""
