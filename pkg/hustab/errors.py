from typing import Optional

from .other_constants import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_PRECONDITION

class HusError(Exception):
    """
    Base class for every error raised by hustab.

    Each subclass carries the exit code the cli uses when the error
    reaches the top level.
    """
    exitCode: int = 1


class ConfigError(HusError):
    exitCode = EXIT_CONFIG

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class PreconditionError(HusError):
    exitCode = EXIT_PRECONDITION

class PrecedenceError(PreconditionError):
    """p < q: no conjugate exponent exists"""

class SmallnessViolation(PreconditionError):
    """The Lipschitz constant is too large for the dichotomy"""

class SingularMatrix(PreconditionError):
    pass

class NotExpansion(PreconditionError):
    pass

class NoDichotomy(PreconditionError):
    pass

class DivergentNorm(PreconditionError):
    """The improper integral on [0, ∞) cannot be bounded from the samples"""


class CertificateFailure(HusError):
    exitCode = EXIT_CERTIFICATE

class NoConvergence(HusError):
    exitCode = EXIT_NO_CONVERGENCE


class IllConditionedWarning(UserWarning):
    pass
