"""Exception hierarchy shared across the package."""


class RepError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RepError, ValueError):
    pass


class NumericError(RepError, ValueError):
    pass


class EmptySystemError(RepError, ValueError):
    pass


class UnidentifiableError(RepError, ValueError):
    """A factor row has no observed entries to be estimated from."""


class RankError(RepError, ValueError):
    pass


class UnderObservedError(RepError, ValueError):
    """Fewer observed entries than latent components."""


class MetricError(RepError, ValueError):
    """A metric is undefined for the given input (e.g. single-class labels)."""


class ConfigError(RepError, ValueError):
    pass


class FormatError(RepError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(RepError, ValueError):
    pass


class SchemaVersionError(RepError, ValueError):
    pass
