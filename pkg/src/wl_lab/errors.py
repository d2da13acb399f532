"""Exception types shared by all modules."""


class WLLabError(Exception):
    """Base class."""


class ParseError(WLLabError, ValueError):
    def __init__(self, message: str, line: int = 0):
        super().__init__(message)
        self.line = line


class RangeError(ParseError):
    pass


class ConflictError(ParseError):
    pass


class ResourceError(WLLabError):
    """Refinement would exceed the configured memory budget."""


class IntegrityError(WLLabError):
    """An input violates a structural guarantee (not coherent, not critical, ...)."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class UnsupportedError(WLLabError, ValueError):
    """Input outside the supported range of an operation."""


class PreconditionMiss(WLLabError):
    """A rule's structural precondition does not hold."""
