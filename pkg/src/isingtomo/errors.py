"""Exception hierarchy.

Data errors (bad input files, inconsistent shapes, invalid arguments) and
numerical failures are kept apart so the CLI can map them to distinct exit
codes.
"""


class IsingTomoError(Exception):
    """Base class for every error raised by the package."""


class DataError(IsingTomoError, ValueError):
    pass


class NumericalError(IsingTomoError, ArithmeticError):
    pass


class DimensionMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingSetting(DataError):
    pass


class EmptyGroup(DataError):
    pass


class InvalidWeights(DataError):
    pass


class InvalidFlux(DataError):
    pass


class LayoutMismatch(DataError):
    pass


class TooManyQubits(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class EmptyDistribution(DataError):
    pass


class MissingModel(DataError):
    pass


class ZeroMatrix(DataError):
    pass


class NotHermitian(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass
