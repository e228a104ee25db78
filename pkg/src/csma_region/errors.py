"""Exception hierarchy.

The CLI maps each error family to an exit code. :class:`InvalidInput` gives
1, :class:`InfeasibleLoad` gives 2 and :class:`InternalError` gives 3.
"""


class CsmaError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(CsmaError, ValueError):
    pass


class InvalidCaptureRatio(InvalidInput):
    pass


class InvalidRtsLength(InvalidInput):
    pass


class InvalidScenario(InvalidInput):
    pass


class TooManyNodes(InvalidInput):
    pass


class DomainError(InvalidInput):
    pass


class CaptureRatioTooSmall(InvalidInput):
    pass


class NotAtEquilibrium(InvalidInput):
    pass


NotAnEquilibrium = NotAtEquilibrium


class InfeasibleLoad(CsmaError):
    pass


class InternalError(CsmaError):
    pass


class NoConvergence(InternalError):
    pass


class MultipleWinners(InternalError):
    pass


class NoSignChange(CsmaError):
    """Raised when the Psi gap never turns non-positive on the scan.

    ``lower_limit`` carries the lower end of the scanned range, which is
    the value reported as the threshold in that case.
    """

    def __init__(self, message: str, lower_limit: float):
        super().__init__(message)
        self.lower_limit = lower_limit
