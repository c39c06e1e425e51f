"""Exception types shared across the package."""


class TheatrePlanError(Exception):
    """Base class for all package errors."""


class ValidationError(TheatrePlanError):
    """An object violates one of its structural invariants."""


class InputError(TheatrePlanError):
    """Malformed external input (file, request, argument)."""


class FormatError(InputError):
    """A serialized artifact has the wrong schema or version."""


class RoomRecoveryError(TheatrePlanError):
    """Room recovery was attempted on a schedule whose concurrency
    exceeds the declared number of open rooms."""

    def __init__(self, day: int, slot: int, message: str | None = None):
        self.day = day
        self.slot = slot
        super().__init__(
            message
            or f"concurrency exceeds open rooms on day {day} at slot {slot}"
        )


class NoSolutionError(TheatrePlanError):
    """A solver finished without producing a usable schedule."""
