"""Model gateway: prompt kinds, templates, structured output, providers."""

from .core import (
    ModelGateway,
    ModelRequest,
    ModelResponse,
    PromptKind,
    estimate_tokens,
    fingerprint_blocks,
)
from .providers import HttpProvider, RecordingProvider, ScriptedProvider, resolve_provider
from .structured import OutputInvalid, parse_output, time_value_ms

__all__ = [
    "ModelGateway",
    "ModelRequest",
    "ModelResponse",
    "PromptKind",
    "estimate_tokens",
    "fingerprint_blocks",
    "HttpProvider",
    "RecordingProvider",
    "ScriptedProvider",
    "resolve_provider",
    "OutputInvalid",
    "parse_output",
    "time_value_ms",
]
