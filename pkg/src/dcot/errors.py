"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration field is missing, unknown, or out of range."""


class CapacityError(ValueError):
    """Input longer than the model context."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class IntegrityError(RuntimeError):
    """Reasoning buffer would hold the same segment twice."""


class ShapeError(ValueError):
    pass


class TraceFormatError(ValueError):
    pass


class SuiteError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoAnswerError(LookupError):
    """Assembled chain is empty, so there is nothing to answer from."""


class SessionStop(Exception):
    """Raised by the decoder when a session must end (budget or step cap)."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)
