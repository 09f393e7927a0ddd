"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`SeaKdeError`
so callers (and the CLI) can map failures onto exit codes by category.
"""


class SeaKdeError(Exception):
    """Base class for package errors."""


class ConfigError(SeaKdeError, ValueError):
    """Invalid configuration or parameter value."""


class DataError(SeaKdeError, ValueError):
    """Input data violates a schema or invariant."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateDataError(DataError):
    pass


class DomainError(SeaKdeError, ValueError):
    """Argument outside the mathematical domain of a function."""


class SingularityError(DomainError):
    """Evaluation exactly at a kernel pole."""


class NumericalError(SeaKdeError, ArithmeticError):
    """A numerical procedure produced a non-finite or inconsistent value."""


class TailResolutionError(NumericalError):
    pass


class SolverError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class FitError(NumericalError):
    pass
