"""Exception types shared across the package."""


class FstError(Exception):
    """Base class for all package-specific errors."""


class ParseError(FstError):
    """Malformed input row; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(FstError):
    """Input data violates a structural requirement (ordering, completeness, sign)."""


class ClassSpecError(FstError):
    """An interval class or partition is not representable on the given grid."""


class MapRangeError(FstError):
    """Instant outside the span covered by an assembled time map."""
