"""Exception types shared across the package."""


class AdamLabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(AdamLabError, ValueError):
    """A builder or operation received an out-of-range parameter."""


class ConfigurationError(AdamLabError, ValueError):
    """An experiment or checker configuration is inconsistent or incomplete."""


class GapDomainError(AdamLabError, ValueError):
    """Requested initialization gap is unreachable on the requested side."""


class UnsupportedDimensionError(AdamLabError, ValueError):
    """Oracle or operation does not support the requested dimension."""


class NumericError(AdamLabError, ArithmeticError):
    """A nonfinite quantity appeared mid-run; carries the step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class DivisionGuardError(AdamLabError, ZeroDivisionError):
    """AdaGrad update attempted with an all-zero squared-gradient history."""


class CoverageGapError(AdamLabError, ValueError):
    """A hyperparameter point falls outside every counterexample lemma's range."""


class DivergedRunError(AdamLabError, RuntimeError):
    """A sweep could not be fitted because at least one trajectory diverged."""

    def __init__(self, message: str, summary):
        super().__init__(message)
        self.summary = summary
