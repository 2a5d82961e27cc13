"""Exception hierarchy shared by every ohlcnet module."""


class OhlcNetError(Exception):
    """Base class for all errors raised by ohlcnet."""


# market data
class MissingColumn(OhlcNetError, ValueError):
    pass


class MalformedRow(OhlcNetError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptySeries(OhlcNetError, ValueError):
    pass


class DuplicateDate(OhlcNetError, ValueError):
    pass


class InvalidSplit(OhlcNetError, ValueError):
    pass


class SeriesTooShort(OhlcNetError, ValueError):
    pass


class ZeroVariance(OhlcNetError, ValueError):
    pass


class WindowTooLarge(OhlcNetError, ValueError):
    pass


# statistics / arima
class NumericalInstability(OhlcNetError, ArithmeticError):
    pass


class SingularRegression(OhlcNetError, ArithmeticError):
    pass


class InvalidOrder(OhlcNetError, ValueError):
    pass


class NonConvergence(OhlcNetError, RuntimeError):
    pass


class NoConvergedModel(OhlcNetError, RuntimeError):
    pass


# neural net
class InvalidConfig(OhlcNetError, ValueError):
    pass


class ShapeMismatch(OhlcNetError, ValueError):
    pass


class NonFiniteGradient(OhlcNetError, FloatingPointError):
    pass


class EmptyDataset(OhlcNetError, ValueError):
    pass


class EmptyGrid(OhlcNetError, ValueError):
    pass


class UnsupportedVersion(OhlcNetError, ValueError):
    pass


class CorruptPayload(OhlcNetError, ValueError):
    pass


# forecasting
class InsufficientHistory(OhlcNetError, ValueError):
    pass


class MissingActuals(OhlcNetError, ValueError):
    pass


class LengthMismatch(OhlcNetError, ValueError):
    pass


class ZeroActual(OhlcNetError, ZeroDivisionError):
    pass


# strategy
class InvalidPeriod(OhlcNetError, ValueError):
    pass


class InsufficientBars(OhlcNetError, ValueError):
    pass


# backtest
class UnknownDate(OhlcNetError, KeyError):
    pass


class NegativeBudget(OhlcNetError, ValueError):
    pass


class UndefinedRatio(OhlcNetError, ArithmeticError):
    def __init__(self, which: str, reason: str):
        self.which = which
        self.reason = reason
        super().__init__(f"{which} undefined: {reason}")


class NoTrades(OhlcNetError, ValueError):
    pass


# charts
class EmptyInput(OhlcNetError, ValueError):
    pass
