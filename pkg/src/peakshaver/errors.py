"""Exception hierarchy shared across the package."""


class PeakShaverError(Exception):
    """Base class for all package errors."""


class DomainError(PeakShaverError, ValueError):
    """An operation was called with arguments outside its domain."""


class FitError(PeakShaverError):
    """A regression or training routine received degenerate data."""


class ClassificationError(PeakShaverError):
    """Day classification received unusable clear-sky data."""


class SchemaError(PeakShaverError):
    """An input file violates its documented schema."""


class ConfigError(PeakShaverError):
    """A configuration document or flag set is invalid."""


class LpError(PeakShaverError):
    """A linear program is malformed or the solver hit a numerical failure."""
