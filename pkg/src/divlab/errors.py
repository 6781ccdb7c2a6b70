"""Exception types shared across divlab."""


class DivlabError(Exception):
    """Base class for all divlab errors."""


class DomainError(DivlabError, ValueError):
    """An argument lies outside the domain of the function."""


class InfeasiblePointError(DomainError):
    """A multiple-description operating point lies outside the achievable region."""


class NumericalError(DivlabError, ArithmeticError):
    """Quadrature failed to reach the requested tolerance.

    Attributes:
        error_estimate: the absolute error estimate the integrator achieved.
        truncation: upper integration limit used in place of infinity, if any.
    """

    def __init__(self, message, error_estimate=float("nan"), truncation=None):
        detail = f"{message} (achieved error estimate {error_estimate:.3g}"
        if truncation is not None:
            detail += f", integration truncated at {truncation:.6g}"
        super().__init__(detail + ")")
        self.error_estimate = error_estimate
        self.truncation = truncation


class EstimationError(DivlabError):
    """Not enough usable data to estimate a distortion exponent."""
