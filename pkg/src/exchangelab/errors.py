"""Exception hierarchy shared by all modules."""


class ExchangeLabError(Exception):
    """Base class for every error raised by the package."""


class ConfigInvalid(ExchangeLabError):
    """Scenario configuration failed schema validation."""


class NumericalFailure(ExchangeLabError):
    """Base class for failures of a numerical method."""


# fock
class NonIsometricMap(ExchangeLabError):
    pass


class NotUnitary(ExchangeLabError):
    pass


class EmptyPostSelection(NumericalFailure):
    pass


class StatisticsMismatch(ExchangeLabError):
    pass


# ramsey
class BadSeparation(ExchangeLabError):
    pass


class DegenerateFit(NumericalFailure):
    pass


class NotDensityMatrix(ExchangeLabError):
    pass


# zeeman / rotor
class IntegratorFailure(NumericalFailure):
    pass


class UnstableConfig(ExchangeLabError):
    pass


class ConvergenceFailure(NumericalFailure):
    pass


class DegenerateGroundState(NumericalFailure):
    pass


class MethodDisagreement(NumericalFailure):
    pass


class MinimumTrackingFailure(NumericalFailure):
    pass
