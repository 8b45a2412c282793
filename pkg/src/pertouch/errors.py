"""Exception hierarchy shared by all pertouch modules."""


class PerTouchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(PerTouchError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(PerTouchError, ValueError):
    """A serialized artifact (segmentation, map, memory file) is malformed."""


class NotFoundError(PerTouchError, LookupError):
    """A referenced region, session, or record does not exist."""


class ParseError(PerTouchError, ValueError):
    """Instruction text does not match the DSL grammar.

    ``offset`` is the byte offset of the first offending token in the
    UTF-8 encoding of the input.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class RangeError(ParseError):
    """A numeric literal in an instruction lies outside [-1, 1]."""


class StorageError(PerTouchError, OSError):
    """The memory bank could not be persisted."""
