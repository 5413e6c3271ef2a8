"""Exception hierarchy shared across the package."""


class EblimeError(Exception):
    """Base class for all package errors."""


class InvalidInputError(EblimeError, ValueError):
    """Caller-supplied data violates a documented precondition."""


class NumericDegeneracyError(EblimeError, ArithmeticError):
    """A numerically degenerate intermediate (failed Cholesky pivot,
    negative quadratic form, non-finite log weight)."""


class StateError(EblimeError, RuntimeError):
    """An object was used before a required step filled it in."""


class AdapterProtocolError(EblimeError, RuntimeError):
    """The external model subprocess violated the line protocol."""
