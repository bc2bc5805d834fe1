"""Exception hierarchy shared by every qtb module."""


class QtbError(Exception):
    """Base class for all errors raised by qtb."""


class DomainError(QtbError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateDataError(QtbError, ValueError):
    """Input data cannot determine the requested parameters."""


class NoDataError(QtbError, ValueError):
    """There is nothing to analyze (zero totals, empty inputs)."""


class ConfigError(QtbError, ValueError):
    """A configuration document or option is invalid.

    ``path`` names the offending field (``"pump.repetition_rate_hz"``) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class PreconditionError(QtbError, ValueError):
    """Input violates an ordering/shape precondition (e.g. unsorted stream)."""


class FitError(QtbError, RuntimeError):
    """A nonlinear fit did not converge.

    The best parameters found so far are kept on ``best`` so callers can
    still inspect them.
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


class FiniteStatisticsWarning(UserWarning):
    """Result is limited by counting statistics (e.g. zero accidentals)."""


class UnphysicalWarning(UserWarning):
    """Estimate lies outside the physical range (V > 1, negative eigenvalue...)."""
