"""Exception types raised across the package."""


class FinslerLabError(Exception):
    """Base class for all package errors."""


class DegenerateGradient(FinslerLabError, ValueError):
    pass


class NotUniformlyElliptic(FinslerLabError):
    pass


class NegativeArgument(FinslerLabError, ValueError):
    pass


class WrongSpecialization(FinslerLabError, TypeError):
    pass


class TraceNotZero(FinslerLabError, ValueError):
    pass


class SupercriticalDimensionPair(FinslerLabError, ValueError):
    pass


class SupportEscapesGrid(FinslerLabError, ValueError):
    pass


class NotCoercive(FinslerLabError, ValueError):
    pass


class LineSearchFailure(FinslerLabError, RuntimeError):
    pass


class MaxIterations(FinslerLabError, RuntimeError):
    pass


class ConfigParseError(FinslerLabError, ValueError):
    pass


class ExperimentFailure(FinslerLabError, RuntimeError):
    pass
