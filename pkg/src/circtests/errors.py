"""Exception hierarchy shared by every module."""


class CircTestError(Exception):
    """Base class for all library errors."""


class InvalidInput(CircTestError, ValueError):
    """Argument outside the documented domain."""


class ZeroResultant(CircTestError):
    """Mean direction undefined: the resultant vector is numerically zero."""


class SingularFit(CircTestError):
    """Local weighted least-squares system is numerically singular."""


class AllZeroWeights(CircTestError):
    """Every local weight vanished at an evaluation point."""


class TooFewObservations(CircTestError):
    pass


class ZeroDistance(CircTestError):
    pass


class DuplicatePredictors(CircTestError):
    """Two predictors in a group coincide, so a circular gap is zero."""


class DegenerateResiduals(CircTestError):
    """Residual sum is (numerically) zero; the statistic is undefined."""


class DegenerateCumulants(CircTestError):
    pass


class DegenerateVariance(CircTestError):
    pass


class SingularShiftSystem(CircTestError):
    pass


class Chi2Unavailable(CircTestError):
    """The chi-square calibration only exists for real-valued responses."""
