"""Exception hierarchy shared by all modules."""


class DBCError(Exception):
    """Base class for every error raised by this package."""


class IndexOutOfRange(DBCError, IndexError):
    pass


class InvalidParameter(DBCError, ValueError):
    pass


class DegenerateChannel(DBCError):
    """An exponent needed for a positive message rate is (numerically) zero."""


class InvalidSchedule(DBCError, ValueError):
    pass


class Infeasible(DBCError):
    pass


class MissingLength(DBCError, KeyError):
    pass


class UnservedReceiver(DBCError):
    pass


class NotInDriftRegion(DBCError):
    pass


class TraceTooShort(DBCError):
    pass


class ParseError(DBCError):
    pass


class ValidationError(DBCError):
    """Config validation failure; ``field`` is a dotted path to the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
