"""Exception types shared across the package."""


class PhasefitError(Exception):
    """Base class for all phasefit errors."""


class ExprSyntaxError(PhasefitError):
    """Parse failure; carries 1-based line/column of the offending token."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class EvaluationOverflowError(PhasefitError):
    """A model evaluation left the supported 63-bit integer range."""


class RangeError(PhasefitError):
    """A raw parameter encoding was outside its declared bit budget."""


class DegenerateMeasureError(PhasefitError):
    """Total interference mass is zero; ratios over it are undefined."""


class MeasureOverflowError(PhasefitError):
    """Pointwise differences cannot be represented for phase reduction."""


class UnsupportedShapeError(PhasefitError):
    """Gate-level simulation needs power-of-two register sizes."""


class SimulationCapError(PhasefitError):
    """Requested dense state exceeds the configured amplitude cap."""


class InternalConsistencyError(PhasefitError):
    """A simulator self-check (norm, separability) failed."""


class CertificateError(PhasefitError):
    """The modulus/shift construction did not converge within its cap."""


class SensitivitySearchError(PhasefitError):
    """The exponent search exceeded its adjustment budget."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class GridDataError(PhasefitError):
    """CSV data did not form a complete integer grid."""


class ReportFormatError(PhasefitError):
    """A serialized report did not match the expected schema."""
