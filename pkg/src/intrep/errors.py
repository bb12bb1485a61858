"""Exception hierarchy shared by all modules."""


class IntrepError(Exception):
    """Base class for package errors."""


class DomainError(IntrepError, ValueError):
    """An argument lies outside the domain of a function."""


class BracketError(IntrepError, ValueError):
    """Function values at the bracket endpoints have the same sign."""


class ConvergenceError(IntrepError, RuntimeError):
    """An iterative method stopped before meeting its tolerance."""


class PrecisionLossError(IntrepError, ArithmeticError):
    """A formula lost too much precision to be trusted (caller should fall back)."""


class DataError(IntrepError, ValueError):
    """Input data violates a structural requirement (ties, degeneracy, parse errors)."""


class ConfigError(IntrepError, ValueError):
    """An experiment configuration is invalid."""
