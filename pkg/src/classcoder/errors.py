"""Exception types shared across the workbench."""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all validation and runtime errors raised by this package."""


class CodebookError(WorkbenchError):
    """Malformed or inconsistent codebook definition."""


class UnknownLabelError(WorkbenchError):
    """A code label that resolves to nothing in the codebook."""

    def __init__(self, label: str, context: str = ""):
        self.label = label
        suffix = f" ({context})" if context else ""
        super().__init__(f"unknown code label {label!r}{suffix}")


class TranscriptError(WorkbenchError):
    """Malformed transcript or gold file, or an invariant violation in one."""


class CompileError(WorkbenchError):
    """Instruction compilation failed (invalid tree, unknown codes, ...)."""


class OverBudgetError(CompileError):
    """Estimated tokens exceed the configured budget."""

    def __init__(self, estimate: int, budget: int):
        self.estimate = estimate
        self.budget = budget
        super().__init__(f"estimated {estimate} tokens exceeds budget of {budget}")


class SelectionError(WorkbenchError):
    """Example selection could not satisfy the requested quotas."""


class BackendError(WorkbenchError):
    """Transport-level failure talking to a coding backend."""


class ResponseParseError(WorkbenchError):
    """An agent response that cannot be parsed into turn codings."""

    def __init__(self, message: str, turn_id: int | None = None):
        self.turn_id = turn_id
        super().__init__(message)


class RunFailedError(WorkbenchError):
    """A coding run that ended in the failed state."""

    def __init__(self, message: str, batch_ordinal: int | None = None):
        self.batch_ordinal = batch_ordinal
        super().__init__(message)


class EvaluationError(WorkbenchError):
    """Evaluation preconditions not met (incomplete run, lesson mismatch)."""


class ExperimentError(WorkbenchError):
    """Experiment preconditions not met, or a condition run failed."""


class StoreError(WorkbenchError):
    """Corrupt or inconsistent on-disk state."""
