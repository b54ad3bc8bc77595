"""Exception hierarchy.

``DataError`` subclasses signal bad input (CLI exit code 3);
``NumericalError`` subclasses signal a numerical failure (exit code 4).
"""


class SeasonalDFMError(Exception):
    pass


class DataError(SeasonalDFMError, ValueError):
    pass


class NumericalError(SeasonalDFMError, ArithmeticError):
    pass


# panel / csv
class GapInTimeIndex(DataError):
    pass


class DuplicateTimestamp(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"line {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)


class MissingDataError(DataError):
    pass


class DegenerateSeriesError(DataError):
    pass


class ShapeError(DataError):
    pass


# imputation
class ImputationError(DataError):
    """Base for per-cell imputation failures; carries station/t context."""

    def __init__(self, message, station=None, t=None):
        self.station = station
        self.t = t
        ctx = []
        if station is not None:
            ctx.append(f"station {station!r}")
        if t is not None:
            ctx.append(f"t={t}")
        super().__init__(f"{', '.join(ctx)}: {message}" if ctx else message)


class InsufficientHistory(ImputationError):
    pass


class InsufficientFuture(ImputationError):
    pass


class SequentialOrderViolation(ImputationError):
    pass


class FirstObservationMissing(ImputationError):
    pass


# sgcv / dfm
class LagTooLarge(DataError):
    pass


class SymmetryError(NumericalError):
    pass


class SpecError(DataError):
    pass


# sarima
class LengthError(DataError):
    pass


class ConstraintError(NumericalError):
    pass


class FitError(NumericalError):
    pass
