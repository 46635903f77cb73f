"""Exception hierarchy.

Every failure the toolkit raises on purpose derives from ``ChargegridError``;
the CLI maps each subclass to its own exit code.
"""


class ChargegridError(Exception):
    exit_code = 1


class InvalidParameter(ChargegridError, ValueError):
    exit_code = 2


class ConfigError(ChargegridError, ValueError):
    exit_code = 2


class IngestionError(ChargegridError):
    exit_code = 3


class CalibrationFailure(ChargegridError):
    """Target fraction cannot be reached inside the search bracket."""

    exit_code = 4

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class RoutingFailure(ChargegridError):
    exit_code = 5


class SnapFailure(RoutingFailure):
    pass


class NumericFailure(ChargegridError, ArithmeticError):
    exit_code = 6

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConditioningDegenerate(ChargegridError):
    """The conditioning event has (numerically) zero probability."""

    exit_code = 7

    def __init__(self, message, rate=None):
        super().__init__(message)
        self.rate = rate


class NoClosedForm(ChargegridError, NotImplementedError):
    """Requested an event-tree term with no closed form available."""

    exit_code = 8


class FitFailure(ChargegridError):
    exit_code = 9
