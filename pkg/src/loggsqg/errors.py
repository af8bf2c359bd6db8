"""Exception hierarchy shared by every module of the package."""


class GsqgError(Exception):
    """Base class for all package errors."""


class SingularAtOrigin(GsqgError):
    """A symbol with a negative power law was evaluated at r = 0."""


class SymbolOverflow(GsqgError, OverflowError):
    """Evaluating a symbol (or an exponential weight) left the float range."""


class GridTooSmall(GsqgError, ValueError):
    pass


class QuadratureFailure(GsqgError):
    """Adaptive quadrature exhausted its depth budget."""


class SingularIntegrand(GsqgError):
    pass


class ShapeMismatch(GsqgError, ValueError):
    pass


class RangeTooNarrow(GsqgError, ValueError):
    pass


class ZeroModeUndefined(GsqgError, ValueError):
    pass


class EmptyBlock(GsqgError, ValueError):
    pass


class LocalizationViolated(GsqgError, ValueError):
    pass


class CFLViolation(GsqgError):
    pass


class Blowup(GsqgError):
    """A tracked norm became NaN/Inf; ``last_good_time`` is the last finite record."""

    def __init__(self, message, last_good_time):
        super().__init__(message)
        self.last_good_time = last_good_time


class ParseError(GsqgError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class UsageError(GsqgError, ValueError):
    pass
