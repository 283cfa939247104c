"""Exception taxonomy shared across the pipeline.

Retryability matters to the workflow engine: ProviderError, EngineError and
StoreError are transient-by-assumption and retried under the workflow retry
policy; everything else fails the activity immediately.
"""

from __future__ import annotations


class StorycutError(Exception):
    """Base class for all pipeline errors."""


class PreconditionError(StorycutError):
    """An operation was called with inputs that violate its contract."""


class ConfigError(StorycutError):
    """Pipeline configuration violates its invariants."""


class ParseError(StorycutError):
    """Malformed serialized artifact.

    Carries the byte offset of the first offending position when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ValidationError(StorycutError):
    """An artifact failed invariant validation; carries the report."""

    def __init__(self, report):
        super().__init__(f"validation failed: {report.summary()}")
        self.report = report


# --- storage ---------------------------------------------------------------


class StoreError(StorycutError):
    """Object store backend failure (retryable)."""


class NotFound(StorycutError):
    """Requested artifact, project, or workflow does not exist."""


class IntegrityError(StorycutError):
    """Stored bytes no longer match the content hash in their ref."""


# --- media -----------------------------------------------------------------


class MediaProbeError(StorycutError):
    """Container could not be probed or lacks a usable video stream."""


class EmptyMedia(StorycutError):
    """Media has zero or negative duration."""


class EngineError(StorycutError):
    """Media engine subprocess failed (retryable); stderr is preserved."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class GraphError(StorycutError):
    """Render graph is structurally invalid (cycle, missing ref, bad node)."""


# --- model gateway ---------------------------------------------------------


class ProviderError(StorycutError):
    """Model provider transport failure (retryable)."""


class StructuredOutputError(StorycutError):
    """Model output failed its schema after exhausting repair attempts.

    ``attempts`` holds every raw response in order.
    """

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


class BudgetError(StorycutError):
    """A token budget cannot be met."""


# --- comprehension ---------------------------------------------------------


class RangeError(StorycutError):
    """Model emitted annotation timestamps outside their scene after repair."""


class IndexCoverageError(StorycutError):
    """Scene traces leave a coverage gap larger than tolerated."""


# --- editing ---------------------------------------------------------------


class RetrievalError(StorycutError):
    """No usable clips could be retrieved for a narration section."""


# --- orchestration ---------------------------------------------------------


class DefinitionError(StorycutError):
    """Unknown workflow definition name."""


class HashMismatchError(StorycutError):
    """A checkpointed activity's inputs changed; resume refused."""


class WorkflowConflictError(StorycutError):
    """A workflow for the same definition and input is already running."""


class WorkflowFailed(StorycutError):
    """Workflow reached Failed status; the cause chain is attached."""


RETRYABLE_ERRORS = (ProviderError, EngineError, StoreError)
