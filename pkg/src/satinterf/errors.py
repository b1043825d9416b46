"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid configuration, geometry or input data."""


class DomainError(ValueError):
    """Argument outside the admissible physical domain."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error:.3e})")
        self.estimate = estimate
        self.error = error


class FitRefused(RuntimeError):
    """Not enough usable data to perform a fit."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
