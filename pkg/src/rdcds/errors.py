"""Exception hierarchy shared by every layer of the package."""


class RDCDSError(Exception):
    """Base class for all errors raised by rdcds."""


class ZeroInverse(RDCDSError, ZeroDivisionError):
    pass


class Singular(RDCDSError):
    pass


class DegeneratePoints(RDCDSError):
    pass


class Inconsistent(RDCDSError):
    """A linear system has no solution."""


class InvalidParams(RDCDSError, ValueError):
    pass


class LengthMismatch(RDCDSError, ValueError):
    pass


class DimensionMismatch(RDCDSError, ValueError):
    pass


class ShapeMismatch(RDCDSError, ValueError):
    pass


class IndexOutOfRange(RDCDSError, IndexError):
    pass


class ReadInfeasible(RDCDSError):
    pass


class UpdateInfeasible(RDCDSError):
    pass


class TailNotZero(RDCDSError):
    """Internal consistency failure: a truncated packet tail was nonzero."""


class LengthExceeded(RDCDSError, ValueError):
    pass


class SnapshotError(RDCDSError, ValueError):
    pass


class ParseError(RDCDSError, ValueError):
    pass


class ValidationError(RDCDSError, ValueError):
    pass
