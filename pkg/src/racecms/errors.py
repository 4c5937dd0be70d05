"""Exception hierarchy shared by every racecms module."""

from __future__ import annotations


class RaceError(Exception):
    """Base class for all racecms errors."""


class InvalidConfig(RaceError, ValueError):
    def __init__(self, field: str, message: str = "") -> None:
        self.field = field
        super().__init__(f"invalid config field {field!r}" + (f": {message}" if message else ""))


class EmptyInput(RaceError, ValueError):
    """Raised when an empty set reaches an operation that needs elements."""


class DomainError(RaceError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class CounterOverflow(RaceError, OverflowError):
    """A counter would exceed its configured width; the sketch is left untouched."""


class ConfigMismatch(RaceError, ValueError):
    """Two structures built with different configurations were combined."""


class CorruptSketch(RaceError, ValueError):
    """A serialized artifact failed framing or consistency checks."""


class ParseError(RaceError, ValueError):
    def __init__(self, line_number: int, message: str) -> None:
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")
