"""Exception hierarchy shared by all modules."""


class WMPhaseError(Exception):
    """Base class for every error raised by :mod:`wmphase`."""


class ParameterError(WMPhaseError, ValueError):
    """Invalid protocol or detector parameters."""


class NumericalError(WMPhaseError, ArithmeticError):
    """A computation could not produce a well-defined number."""


class NonFinite(NumericalError):
    pass


class NoSignChange(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class BadReadout(ParameterError):
    pass


class InfiniteN(ParameterError):
    """A per-step object was requested for the N -> infinity protocol."""


class IndexOutOfRange(ParameterError):
    pass


class NullState(NumericalError):
    pass


class OrthogonalNeighbors(NumericalError):
    pass


class UndefinedAtCriticalPoint(NumericalError):
    """The phase curve passes through a zero of the amplitude."""


class UndefinedPhase(NumericalError):
    pass


class NotQuantized(NumericalError):
    pass


class TooLargeForBruteForce(ParameterError):
    pass


class TooLargeForExactS(ParameterError):
    pass


class DegenerateDenominator(NumericalError):
    pass
