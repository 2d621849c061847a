"""Exception hierarchy shared by every solver."""


class CoverlockError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInstance(CoverlockError, ValueError):
    pass


class NonPositiveCost(InvalidInstance):
    pass


class NonPositiveBudget(InvalidInstance):
    pass


class CoverageOutOfRange(InvalidInstance):
    pass


class LengthMismatch(InvalidInstance):
    pass


class NonFiniteEntry(InvalidInstance):
    pass


class Infeasible(CoverlockError):
    """The coverage floor cannot be met within the budget."""


class TooLarge(CoverlockError):
    """Instance exceeds the size limit of an enumeration oracle."""


class RoundingInfeasible(CoverlockError):
    pass


class NoFeasibleCutoff(CoverlockError):
    """No prefix of the ratio ranking satisfies both constraints."""


class CoreInfeasible(CoverlockError):
    """The top-K units of the ratio ranking exceed the budget."""


class TargetOutOfRange(CoverlockError, ValueError):
    pass


class BracketOverflow(CoverlockError):
    """The upper multiplier grew past its cap without reaching feasibility."""


class TooManyInfeasibleDraws(CoverlockError):
    pass
