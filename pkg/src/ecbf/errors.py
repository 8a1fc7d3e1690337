"""Exception hierarchy shared by every ecbf module."""


class CbfError(Exception):
    """Base class for all ecbf errors."""


# packet parsing / rewriting
class TruncatedHeader(CbfError, ValueError):
    pass


class NotIpv4(CbfError, ValueError):
    pass


class BadChecksum(CbfError, ValueError):
    pass


class OutOfRange(CbfError, ValueError):
    pass


class MalformedOptions(CbfError, ValueError):
    pass


class NoHeaderRoom(CbfError, ValueError):
    pass


# profiles
class SchemaMismatch(CbfError, ValueError):
    pass


class EmptyProfile(CbfError):
    pass


class UnknownPair(CbfError, KeyError):
    pass


class VersionMismatch(CbfError, ValueError):
    pass


class CorruptDocument(CbfError, ValueError):
    pass


# filtering
class ThresholdUnset(CbfError):
    """Raised when an attack-period packet arrives before any nominal profile value exists."""

    def __init__(self, ts=None):
        self.ts = ts
        msg = "discarding threshold unavailable: nominal profile was never set"
        if ts is not None:
            msg += f" (packet ts={ts})"
        super().__init__(msg)


# trace io
class ParseError(CbfError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonMonotoneTimestamp(ParseError):
    pass


class BadMagic(CbfError, ValueError):
    pass


class TruncatedRecord(CbfError, ValueError):
    pass


class InvalidConfig(CbfError, ValueError):
    pass
