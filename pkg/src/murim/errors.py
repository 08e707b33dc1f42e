"""Exception hierarchy shared across the simulator."""

from __future__ import annotations


class MurimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(MurimError, ValueError):
    """Invalid configuration or precondition violation.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class ParseError(MurimError, ValueError):
    """Malformed input file. Carries a 1-based line or a byte offset."""

    def __init__(
        self,
        message: str,
        path: str | None = None,
        line: int | None = None,
        offset: int | None = None,
    ) -> None:
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ProtocolError(MurimError, RuntimeError):
    """A round-protocol contract was broken (empty rounds, length mismatch)."""


class NumericalError(MurimError, ArithmeticError):
    """A numerical kernel cannot produce a meaningful result."""
