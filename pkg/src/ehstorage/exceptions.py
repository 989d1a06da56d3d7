"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalInstabilityError(ArithmeticError):
    """Floating-point cancellation destroyed too many significant digits."""


class ConfigError(ValueError):
    """An experiment or simulation configuration is invalid."""


class SupportMismatchError(ValueError):
    """Empirical and analytic objects live on different supports."""
