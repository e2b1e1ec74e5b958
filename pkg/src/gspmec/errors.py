"""Exception hierarchy shared by all modules."""


class GspMecError(Exception):
    """Base class for every error raised by this package."""


class ParseError(GspMecError):
    """A scenario file could not be parsed."""


class ValidationError(GspMecError):
    """A scenario value violates an invariant.

    The offending field path is kept in ``field`` so callers can report it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownPreset(GspMecError):
    pass


class DomainError(GspMecError, ValueError):
    """A numeric argument lies outside the domain of a formula."""


class DegenerateQuality(GspMecError):
    """A VM has zero quality score where a positive one is required."""


class NoAllocations(GspMecError):
    pass


class MissingColumn(GspMecError):
    pass


class PrecisionWarning(UserWarning):
    """Emitted when two exact computations disagree beyond round-off."""
