class DropoutTSError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(DropoutTSError, ValueError):
    pass


class EmptyInputError(DropoutTSError, ValueError):
    pass


class InsufficientDataError(DropoutTSError, ValueError):
    pass


class SplitError(DropoutTSError, ValueError):
    pass


class DegenerateFitError(DropoutTSError, ValueError):
    pass


class InvalidRateError(DropoutTSError, ValueError):
    pass


class ShapeMismatchError(DropoutTSError, ValueError):
    pass


class DivergenceError(DropoutTSError, RuntimeError):
    pass


class ConfigError(DropoutTSError, ValueError):
    pass
