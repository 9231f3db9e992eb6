"""Exception hierarchy shared by every slowread module."""


class SlowReadError(Exception):
    """Base class for all slowread errors."""


# simkernel
class PastEvent(SlowReadError):
    pass


class BadRange(SlowReadError):
    pass


# netmodel
class MalformedCidr(SlowReadError, ValueError):
    pass


class NonZeroHostBits(MalformedCidr):
    pass


class BlockExhausted(SlowReadError):
    pass


# server
class NotTransferring(SlowReadError):
    pass


class BadParam(SlowReadError, ValueError):
    pass


class NotInPool(SlowReadError):
    pass


# metrics
class EmptySample(SlowReadError, ValueError):
    pass


# scenario / cli
class ScenarioError(SlowReadError):
    """Scenario file rejected; ``field`` names the offending key path."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class MissingFile(ScenarioError):
    pass


# wire
class NonLoopbackRefused(SlowReadError):
    pass


class BindError(SlowReadError, OSError):
    pass
