"""Exception hierarchy shared by all modules."""


class MonopoleError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MonopoleError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoRootsError(MonopoleError):
    """No turning points exist at the requested energy."""


class NotQuasiBoundError(MonopoleError):
    """The state or energy has no barrier to tunnel through."""


class IntegrationError(MonopoleError):
    """A time or phase integration failed its accuracy guard."""

    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class LifetimeTooLongError(MonopoleError):
    """The survival probability does not decay measurably inside the echo window."""


class FitError(MonopoleError):
    """A least-squares fit did not reproduce its data."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UsageError(MonopoleError):
    """Bad command line or config-file input."""
