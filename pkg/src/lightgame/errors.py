"""Exception types shared across the package."""


class LightingGameError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LightingGameError, ValueError):
    """A quantity was evaluated outside its mathematical domain.

    Raised instead of silently clamping: votes at or above the baseline make
    the points logarithm blow up, so evaluation refuses them outright.
    """


class NoParticipantsError(LightingGameError, ValueError):
    """A round was evaluated with no participating occupants."""


class DegenerateRoundError(LightingGameError, ArithmeticError):
    """Point shares are undefined because the shares denominator vanished."""


class InsufficientDataError(LightingGameError, ValueError):
    """An occupant has no usable observations for estimation."""

    def __init__(self, occupant, message=None):
        self.occupant = occupant
        super().__init__(message or f"no usable observations for occupant {occupant!r}")


class IndeterminateThetaError(LightingGameError, ValueError):
    """The points-term column is identically zero, so theta cannot be identified."""

    def __init__(self, occupant, message=None):
        self.occupant = occupant
        super().__init__(
            message or f"points-term column is zero for occupant {occupant!r}; theta indeterminate"
        )


class DataFormatError(LightingGameError, ValueError):
    """Malformed input data. ``rows`` carries (row_number, message) diagnostics."""

    def __init__(self, message, rows=()):
        self.rows = list(rows)
        super().__init__(message)


class UncoveredDateError(DataFormatError):
    """Observations fall on days no default period covers."""

    def __init__(self, dates):
        self.dates = sorted(dates)
        listed = ", ".join(str(d) for d in self.dates)
        super().__init__(f"no default period covers: {listed}")


class SamplingError(LightingGameError, RuntimeError):
    """Presence sampling failed to produce a usable draw."""


class NumericalError(LightingGameError, RuntimeError):
    """A numerical routine failed in a way the caller cannot recover from."""


class NotAuthorizedError(LightingGameError):
    """Unknown or insufficient credentials for a service operation."""


class NotPresentError(LightingGameError):
    """A service operation requires the occupant to be logged in today."""
