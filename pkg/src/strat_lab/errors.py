"""Exception types shared across the package."""


class StratLabError(Exception):
    """Base class for all package errors."""


class ParameterGateError(StratLabError, ValueError):
    """Raised when (nu, kappa, beta) fall outside the admissible range of a bound."""


class DegenerateModeError(StratLabError, ValueError):
    """Raised when an operation is asked to act on a mode where it is singular."""


class StepSizeUnderflow(StratLabError, RuntimeError):
    """Raised when the adaptive controller drives the step below its floor."""


class InsufficientSamplingError(StratLabError, ValueError):
    pass


class SymmetryViolationError(StratLabError, ValueError):
    """Raised when initial profiles do not describe a real field."""


class QuadratureError(StratLabError, ValueError):
    """Raised when the eta grid truncates too much of the initial mass."""


class ParseError(StratLabError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(StratLabError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
