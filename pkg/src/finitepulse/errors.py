"""Exception types raised by the toolkit."""


class FinitePulseError(Exception):
    """Base class for all toolkit errors."""


class PoleError(FinitePulseError, ValueError):
    """Argument sits on a pole of a meromorphic function."""


class AccuracyError(FinitePulseError, ArithmeticError):
    """No evaluation route reached the required accuracy."""


class InvalidDuration(FinitePulseError, ValueError):
    pass


class UnsupportedKind(FinitePulseError, ValueError):
    pass


class OutOfDomain(FinitePulseError, ValueError):
    pass


class CuspError(FinitePulseError, ValueError):
    """Derivative requested where the envelope has a kink."""


class StepFailure(FinitePulseError, RuntimeError):
    """Adaptive step size underflowed."""


class InvalidLambda(FinitePulseError, ValueError):
    pass


class FeatureNotFound(FinitePulseError, LookupError):
    pass


class InsufficientData(FinitePulseError, ValueError):
    pass


class NonConvergence(FinitePulseError, RuntimeError):
    """Optimizer hit its evaluation budget; ``best`` holds the best point seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularJacobian(FinitePulseError, ArithmeticError):
    pass


class ParseError(FinitePulseError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MissingColumn(FinitePulseError, KeyError):
    pass
