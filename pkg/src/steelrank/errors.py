"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid argument values: sizes, probabilities, dimensions, malformed samples."""


class BudgetError(RuntimeError):
    """Exact enumeration would exceed the configured split budget."""


class NumericError(RuntimeError):
    """A numeric routine failed to meet its accuracy contract."""
