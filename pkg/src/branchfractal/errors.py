"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A parameter lies outside its admissible domain."""


class InsufficientDataError(ValueError):
    """Too little data for the requested estimate."""


class DegenerateFitError(ValueError):
    """A log-log regression has no well-defined slope."""


class IncompleteLevelError(RuntimeError):
    """A tree level may have lost mass to truncation."""


class HorizonTooSmallError(RuntimeError):
    """The simulated horizon does not cover the requested range."""


class ResourceLimitError(RuntimeError):
    """A run exceeded its memory or numeric budget."""


class RejectionLimitError(RuntimeError):
    """A proposal loop exceeded its rejection guard.

    ``stats`` holds the counters at the moment of failure and ``tree`` the
    partial result, when available.
    """

    def __init__(self, message, stats=None, tree=None):
        super().__init__(message)
        self.stats = stats
        self.tree = tree


class SchemaError(ValueError):
    """A file does not match the expected schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedPlotError(ValueError):
    """Plotting requested for a point set that cannot be drawn."""
