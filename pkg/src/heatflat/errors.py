"""Exception hierarchy shared by all heatflat modules."""


class HeatFlatError(Exception):
    """Base class for every error raised by heatflat."""


class ConfigError(HeatFlatError, ValueError):
    """Invalid parameter or configuration value."""


class DomainError(HeatFlatError, ValueError):
    """Argument outside the domain where an operation is defined."""


class InputError(HeatFlatError, ValueError):
    """Malformed or non-finite input data."""


class NumericRangeError(HeatFlatError, ArithmeticError):
    """Intermediate value not representable in binary64."""


class InstabilityError(HeatFlatError, RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index
