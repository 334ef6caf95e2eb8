"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` and
subclasses -> 3, ``NumericError`` and subclasses -> 4.
"""


class ExcerptLabError(Exception):
    """Base class for all package errors."""


class ConfigError(ExcerptLabError, ValueError):
    """Run configuration does not validate."""


class DataError(ExcerptLabError, ValueError):
    """Input data is malformed or violates a precondition."""


class InputError(DataError):
    """An argument is outside the domain of the operation."""


class PanelFormatError(DataError):
    """Panel CSV is missing columns or breaks a dataset invariant."""


class WavError(DataError):
    """Base class for WAV parse failures."""


class MalformedHeaderError(WavError):
    pass


class UnsupportedFormatError(WavError):
    pass


class TruncatedDataError(WavError):
    pass


class DegenerateSignalError(DataError):
    pass


class CodecError(DataError):
    """A codec failed to round-trip its input."""


class EstimationError(ExcerptLabError):
    """The design cannot be estimated."""


class RankDeficientError(EstimationError, DataError):
    def __init__(self, columns, message=None):
        self.columns = list(columns)
        super().__init__(message or f"design is rank deficient; collinear columns: {', '.join(self.columns)}")


class InferenceError(EstimationError, DataError):
    """Standard errors cannot be formed (e.g. a single cluster)."""


class UndefinedCorrelationError(DataError):
    pass


class NumericError(ExcerptLabError, ArithmeticError):
    """Iterative numerical routine failed."""


class ConvergenceError(NumericError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class TrainingError(DataError):
    """Quantizer or model training received a degenerate corpus."""
