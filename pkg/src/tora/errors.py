"""Exception hierarchy with stable machine-readable codes.

The CLI prints ``tora-error: <code>: <message>`` on stderr so downstream
tooling can classify failures without parsing prose.
"""


class ToraError(Exception):
    """Base class for all library errors."""

    code = "error"


class FormatError(ToraError):
    """File does not follow the array file format."""

    code = "format_error"


class TruncationError(ToraError):
    """Header and payload lengths disagree."""

    code = "truncation_error"


class UnsupportedLayoutError(ToraError):
    """Column-major array files are rejected rather than transposed."""

    code = "unsupported_layout"


class ValidationError(ToraError):
    """An argument violates a documented precondition."""

    code = "validation_error"


class DegenerateInputError(ToraError):
    """Input is valid in shape but numerically degenerate (zero variance, zero norm)."""

    code = "degenerate_input"


class ConfigurationError(ToraError):
    """A configuration value is inconsistent with the requested operation."""

    code = "configuration_error"


class NumericalFailureError(ToraError):
    """A computation produced non-finite values."""

    code = "numerical_failure"

    def __init__(self, message, block=None, timestep=None):
        super().__init__(message)
        self.block = block
        self.timestep = timestep
