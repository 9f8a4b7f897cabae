"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to (1 usage,
2 data, 3 numeric) and a snake_case ``status`` used in per-row reports.
"""

from __future__ import annotations

import re


def _snake(name: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


class CmlmError(Exception):
    exit_code = 2

    @classmethod
    def status(cls) -> str:
        return _snake(cls.__name__)


class UsageError(CmlmError, ValueError):
    exit_code = 1


class DataError(CmlmError, ValueError):
    exit_code = 2


class NumericError(CmlmError, ArithmeticError):
    exit_code = 3


# usage
class UnknownModel(UsageError):
    pass


class UnknownGrouping(UsageError):
    pass


# data
class InsufficientData(DataError):
    pass


class EmptyUniverse(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class WeightsNotNormalized(DataError):
    pass


class EmptyInput(DataError):
    pass


class MissingHeader(DataError):
    pass


class BadRow(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateKey(DataError):
    def __init__(self, key, lines: tuple[int, int] | None = None, source: str = ""):
        self.key = key
        self.lines = lines
        where = f" at lines {lines[0]} and {lines[1]}" if lines else ""
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}duplicate key {key!r}{where}")


class OutOfDomainValue(DataError):
    def __init__(self, field: str, value, line: int | None = None):
        self.field = field
        self.value = value
        self.line = line
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{field}={value!r} outside its domain")


class ZeroTotalValue(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class InvalidConfig(DataError):
    pass


class UnknownRegressor(DataError):
    pass


class DuplicateColumn(DataError):
    pass


class TooFewObservations(DataError):
    pass


class UnknownAsset(DataError):
    pass


# numeric
class RankDeficient(NumericError):
    pass


class SingularCovariance(NumericError):
    pass


class TangencyUndefined(NumericError):
    pass


class NegativeSharpeMarket(NumericError):
    pass


class DegenerateFrontier(NumericError):
    pass


class ProjectionOutOfDomain(NumericError):
    pass


class NonPositiveRiskAversion(NumericError):
    pass


class NonPositiveTheta(NumericError):
    pass


class ZeroRisk(NumericError):
    pass


class NoWithinVariation(NumericError):
    pass


class NoSlopes(NumericError):
    pass
