"""Exception hierarchy shared by all modules."""


class UnifieldError(Exception):
    """Base class for every error raised by this package."""


class KernelError(UnifieldError, ValueError):
    """A transition table is not a valid kernel.

    ``diagnostics`` lists ``(y1, y2, message)`` for each offending parent pair.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class ShapeMismatch(KernelError):
    pass


class NegativeEntry(KernelError):
    pass


class NonStochasticRow(KernelError):
    pass


class ParseError(UnifieldError, ValueError):
    pass


class DegenerateDelta(UnifieldError, ValueError):
    """The operation needs ``0 < delta < 1`` (or ``delta > 0``)."""


class AssumptionFailed(UnifieldError):
    """A sufficient condition for a.s. termination does not hold."""


class Assumption3Failed(AssumptionFailed):
    """The two-set minorization needed by the ``example1`` family fails."""


class StepLimitExceeded(UnifieldError):
    """A backward cluster construction did not terminate within the budget.

    ``stats`` carries whatever was measured before giving up.
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = dict(stats or {})


class MissingBoundaryValue(UnifieldError, KeyError):
    pass


class NotABlockVertex(UnifieldError, ValueError):
    pass


class WindowMismatch(UnifieldError, ValueError):
    pass


class InternalError(UnifieldError, RuntimeError):
    """An invariant that the algorithms guarantee was found broken."""
