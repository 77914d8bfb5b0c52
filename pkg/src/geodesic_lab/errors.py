"""Exception hierarchy shared by the library and the CLI."""


class GeodesicLabError(Exception):
    """Base class for all errors raised by geodesic_lab."""


class ValidationError(GeodesicLabError, ValueError):
    """Bad input: a precondition or a file format check failed."""


class ComputeError(GeodesicLabError):
    """A computation could not be completed (overflow, guard exceeded, ...)."""


class CoverageError(ComputeError):
    """The data at hand does not reach far enough for the request."""
