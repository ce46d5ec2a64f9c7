"""Exception hierarchy.

Errors split into three families so the CLI can map them onto exit codes:
configuration/contract problems, I/O problems and numeric failures.
"""


class E3Error(Exception):
    """Base class for all package errors."""


class ConfigError(E3Error, ValueError):
    pass


class DataError(E3Error, IOError):
    pass


class NumericError(E3Error, ArithmeticError):
    pass


class EmptyInput(ConfigError):
    pass


class NonSymmetric(ConfigError):
    pass


class TooFewPoints(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class NonPositiveSigma(ConfigError):
    pass


class RangeError(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class MissingGroundTruth(ConfigError):
    pass


class NonScalarLoss(ConfigError):
    pass


class UnitVectorViolation(ConfigError):
    pass


class DegenerateAverage(NumericError):
    pass


class DegenerateAggregation(NumericError):
    pass


class IllConditioned(NumericError):
    pass


class ParseError(DataError):
    def __init__(self, path, line, message="cannot parse"):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ZeroNormal(ParseError):
    def __init__(self, path, line):
        super().__init__(path, line, "zero-length normal")
