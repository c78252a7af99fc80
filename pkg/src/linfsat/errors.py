"""Exception hierarchy shared across the package."""


class LinfsatError(Exception):
    """Base class for all package errors."""


class SingularBlock(LinfsatError):
    pass


class InvalidParams(LinfsatError, ValueError):
    pass


class BadAlpha(LinfsatError, ValueError):
    pass


class BadInput(LinfsatError, ValueError):
    pass


class DimensionMismatch(LinfsatError, ValueError):
    pass


class BadTimestep(LinfsatError, ValueError):
    pass


class Infeasible(LinfsatError):
    """No decision variables satisfy the requested LMIs."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class InfeasibleAtAllAlpha(Infeasible):
    pass


class NotStabilizable(LinfsatError):
    pass


class NotControllable(LinfsatError):
    pass
