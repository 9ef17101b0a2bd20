"""Exception hierarchy shared across the toolkit."""


class BBOError(Exception):
    """Base class for all toolkit errors."""


class SpaceError(BBOError, ValueError):
    """Invalid parameter or search-space definition."""


class InvalidConfigurationError(BBOError, ValueError):
    """A configuration does not conform to its search space."""


class EncodingError(BBOError, ValueError):
    """Vector length or layout does not match the requested encoding."""


class ObservationShapeError(BBOError, ValueError):
    """Observation dimensions do not match the owning task."""


class WrongTaskTypeError(BBOError, ValueError):
    """Operation called on a task with the wrong number of objectives."""


class InsufficientDataError(BBOError, ValueError):
    """Not enough usable observations for the requested operation."""


class NumericError(BBOError, ArithmeticError):
    """Unrecoverable numerical failure (e.g. non-PD kernel after max jitter)."""


class ExhaustedSpaceError(BBOError):
    """Every configuration of a finite space has already been suggested."""


class PopulationSizeError(BBOError, ValueError):
    """Population does not satisfy the algorithm's size requirements."""


class HistoryParseError(BBOError, ValueError):
    """Malformed or wrong-version history document.

    Carries optional location context (``line``, ``field``) for error messages.
    """

    def __init__(self, message, line=None, field=None):
        parts = [message]
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field {field!r}")
        super().__init__(": ".join(parts))
        self.line = line
        self.field = field


class SetupError(BBOError, ValueError):
    """Bad task definition, missing command, or unusable objective callable."""
