"""Error taxonomy shared across the package.

Every error that can surface at the CLI boundary carries a short machine-parseable
``code``; the CLI prints exactly one line ``<code>: <message>`` and exits nonzero.
"""


class RefgroundError(Exception):
    """Base class for all package errors."""

    code = "error"


class UsageError(RefgroundError):
    """An API was called in a way its contract forbids."""

    code = "usage-error"


class ShapeError(RefgroundError):
    """Tensor dimensions do not line up; message names the offending operand."""

    code = "shape-error"


class ValidationError(RefgroundError):
    """Input data violates a documented invariant."""

    code = "validation-error"


class SchemaError(RefgroundError):
    """A file or mapping does not match its documented schema."""

    code = "schema-error"


class ParseError(RefgroundError):
    """An expression could not be parsed; carries the failing token position."""

    code = "parse-error"

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at token {position})"
        super().__init__(message)
        self.position = position


class StructureError(RefgroundError):
    """A graph violates a structural rule (cycle, missing root, bad reference)."""

    code = "structure-error"


class ModelDataMismatch(RefgroundError):
    """Checkpoint and data disagree (feature width, vocabulary provenance)."""

    code = "model-data-mismatch"


class SamplingFailure(RefgroundError):
    """A single sampling attempt dead-ended; callers retry within budget."""

    code = "sampling-failure"


class QuotaShortfall(RefgroundError):
    """Generation exhausted its retry budget with quota cells unfilled."""

    code = "quota-shortfall"
