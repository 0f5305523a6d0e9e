"""Exception hierarchy shared by every subpackage."""


class GmsamError(Exception):
    """Base class for all errors raised by gmsam."""


class ConfigurationError(GmsamError, ValueError):
    pass


class DimensionError(GmsamError, ValueError):
    pass


class NumericDomainError(GmsamError, ArithmeticError):
    pass


class TrainingDivergenceError(GmsamError, ArithmeticError):
    """A loss or gradient went non-finite during training."""

    def __init__(self, message, step=None, parameter=None):
        super().__init__(message)
        self.step = step
        self.parameter = parameter


class FormatError(GmsamError, ValueError):
    """Malformed checkpoint or image file; ``offset`` is the byte position."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IngestionError(GmsamError, ValueError):
    pass


class CacheInvalidationError(GmsamError, ValueError):
    pass


class PromptError(GmsamError, ValueError):
    pass


class ProtocolError(GmsamError, ValueError):
    pass
