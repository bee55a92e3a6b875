"""Exception hierarchy shared across the package.

Errors are grouped by how the CLI maps them to exit codes: configuration
problems exit with 2, data problems with 3, numerical divergence with 4.
"""


class TopoForecastError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(TopoForecastError):
    """Invalid configuration or incompatible component wiring."""

    exit_code = 2


class DataError(TopoForecastError):
    """Malformed, missing, or insufficient input data."""

    exit_code = 3


# persistence
class EmptyInput(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class OracleTooLarge(ConfigError):
    pass


# windowing
class WindowTooLong(ConfigError):
    pass


class WindowTooShort(ConfigError):
    pass


class LengthMismatch(DataError):
    pass


# vectorize
class BankMismatch(ConfigError):
    pass


class NoBars(DataError):
    pass


# autodiff / attention / models
class ShapeMismatch(ConfigError):
    pass


class SingularAxis(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


# train
class SeriesTooShort(DataError):
    pass


class DivergenceDetected(TopoForecastError):
    """Training loss became non-finite; aborts with a diagnostic."""

    exit_code = 4


class InsufficientHistory(DataError):
    pass


class EmptyEnsemble(DataError):
    pass


# metrics
class EmptyHorizon(DataError):
    pass


class ZeroScale(DataError):
    pass


class ZeroBaseline(DataError):
    pass


class InsufficientSeasons(DataError):
    pass


# data ingestion
class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class EmptySeries(DataError):
    pass
