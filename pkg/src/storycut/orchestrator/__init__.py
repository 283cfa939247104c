"""Durable workflow orchestration: engine, records, built-in definitions."""

from .definitions import BUILTIN_DEFINITIONS
from .engine import (
    ActivityEntry,
    KillSignal,
    RetryPolicy,
    WorkflowContext,
    WorkflowEngine,
    WorkflowRecord,
)

__all__ = [
    "BUILTIN_DEFINITIONS",
    "ActivityEntry",
    "KillSignal",
    "RetryPolicy",
    "WorkflowContext",
    "WorkflowEngine",
    "WorkflowRecord",
]
