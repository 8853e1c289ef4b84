"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was called with arguments that violate its contract."""


class RadiusValidationError(ContractViolationError):
    """The Gram matrix of an input exceeds its declared entrywise radius."""

    def __init__(self, message, i=None, j=None, value=None):
        super().__init__(message)
        self.i = i
        self.j = j
        self.value = value


class SketchRankError(ContractViolationError):
    """A sketched matrix stayed rank deficient after the allowed retries."""


class InternalInvariantError(RuntimeError):
    """An internal invariant failed; indicates a bug, not bad user input."""


class ParseError(ValueError):
    """A matrix file could not be parsed.

    Carries the offending location: ``line`` (1-based) for text formats,
    ``byte`` offset for the binary format.
    """

    def __init__(self, message, line=None, byte=None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif byte is not None:
            loc = f" (byte {byte})"
        super().__init__(message + loc)
        self.line = line
        self.byte = byte
