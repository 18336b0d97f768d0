"""Exception hierarchy shared across the package."""


class PairSafeError(Exception):
    """Base class for all package errors."""


class GridTooCoarse(PairSafeError):
    pass


class OutOfBounds(PairSafeError):
    """A query fell outside a non-periodic grid axis."""

    def __init__(self, axis, value, lo, hi):
        self.axis = axis
        self.value = value
        super().__init__(f"axis {axis}: {value!r} outside [{lo}, {hi}]")


class EmptyTarget(PairSafeError):
    pass


class NonConvergence(PairSafeError):
    """Raised by callers that require a converged field (the solver itself only warns)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NonConvergenceWarning(UserWarning):
    pass


class FormatVersionMismatch(PairSafeError):
    pass


class CorruptPayload(PairSafeError):
    pass


class BRTTouchesBoundary(PairSafeError):
    pass


class ConfigInvalid(PairSafeError):
    pass


class FieldMismatch(PairSafeError):
    pass


class BadTemplateParams(PairSafeError):
    pass


class EmptyTrace(PairSafeError):
    pass


class SchemaMismatch(PairSafeError):
    pass


class ParseError(PairSafeError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class UnknownKey(ParseError):
    pass


class UnitError(ParseError):
    pass
