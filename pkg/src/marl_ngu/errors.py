"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration or mismatched dimensions.

    ``field`` names the offending configuration key when there is one.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UsageError(RuntimeError):
    """An API was called out of order or with out-of-range arguments."""


class TrainingDivergenceError(ArithmeticError):
    """A loss or gradient became non-finite."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer
