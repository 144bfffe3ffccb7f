"""Exception types shared across the toolkit."""


class BattgateError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(BattgateError):
    """A file or container does not match the expected channel/column schema."""


class ParseError(BattgateError):
    """A file has unreadable content; the message carries the row/column."""


class PreconditionError(BattgateError, ValueError):
    """An operation was called outside its documented domain."""


class DegenerateGeometryError(BattgateError):
    """Point set has too low an affine dimension for the requested hull."""


class InfeasibleError(BattgateError):
    """The constraint set admits no feasible point (e.g. nu * l < 1)."""


class ConvergenceError(BattgateError):
    """An iterative solver exhausted its iteration budget."""
