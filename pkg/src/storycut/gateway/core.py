"""Uniform model access: prompt assembly, budgeting, structured-output repair.

Every pipeline stage talks to providers through ``ModelGateway.complete``:
it renders the kind's template plus labeled context blocks, sends the prompt,
parses/validates the output against the kind's schema, and re-prompts with
the machine-readable validation error up to ``repair_attempts`` times.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional

from ..config import PipelineConfig
from ..errors import StructuredOutputError
from . import structured, templates


class PromptKind(str, Enum):
    """The specialized agent roles; each binds one template and one schema."""

    BOOTSTRAP_SCRATCHPAD = "bootstrap_scratchpad"
    SEGMENT_COMPREHEND = "segment_comprehend"
    COMPRESS_SCRATCHPAD = "compress_scratchpad"
    SCENE_COMPREHEND = "scene_comprehend"
    REFINE = "refine"
    QA_ROUTE = "qa_route"
    QA_ANSWER = "qa_answer"
    STORYBOARD_REASON = "storyboard_reason"
    STORYBOARD_STRUCTURE = "storyboard_structure"
    NARRATE = "narrate"
    RETRIEVE_CLIPS = "retrieve_clips"
    MUSIC_SELECT = "music_select"


def estimate_tokens(text: str) -> int:
    """Provider-agnostic token estimate: ceil(len/4), monotone in length."""
    return (len(text) + 3) // 4


def render_blocks(blocks: tuple[tuple[str, str], ...]) -> str:
    return "\n\n".join(f"### {label}\n{text}" for label, text in blocks)


def fingerprint_blocks(blocks: tuple[tuple[str, str], ...]) -> str:
    h = hashlib.sha256()
    for label, text in blocks:
        h.update(label.encode("utf-8"))
        h.update(b"\x00")
        h.update(text.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ModelRequest:
    kind: PromptKind
    blocks: tuple[tuple[str, str], ...]
    attachments: tuple[str, ...]
    prompt: str
    token_estimate: int
    fingerprint: str


@dataclass(frozen=True)
class ModelResponse:
    text: str
    value: Any
    attempts: int


_REPAIR_SUFFIX = (
    "\n\n### previous invalid output\n{output}"
    "\n\n### validation error\n{error}"
    "\nReturn a corrected response that satisfies the required format exactly."
)


class ModelGateway:
    """Stateless front door to one provider.

    ``journal`` (a list, appended under a lock) receives one entry per model
    call attempt so workflow records can expose the full model traffic.
    """

    def __init__(
        self,
        provider,
        config: PipelineConfig | None = None,
        journal: list | None = None,
        warnings: list | None = None,
    ):
        self.provider = provider
        self.config = config or PipelineConfig()
        self.journal = journal if journal is not None else []
        self.warnings = warnings if warnings is not None else []
        self._lock = threading.Lock()
        max_inflight = getattr(provider, "max_inflight", None)
        self._slots = threading.Semaphore(max_inflight) if max_inflight else None

    def model_info(self) -> dict:
        return {
            "model": getattr(self.provider, "model_id", "unknown"),
            "provider": getattr(self.provider, "name", type(self.provider).__name__),
        }

    def request(
        self,
        kind: PromptKind,
        blocks: list[tuple[str, str]] | tuple = (),
        attachments: tuple[str, ...] | list = (),
    ) -> ModelRequest:
        blocks = tuple((str(label), str(text)) for label, text in blocks)
        prompt = templates.render(kind, blocks)
        return ModelRequest(
            kind=kind,
            blocks=blocks,
            attachments=tuple(attachments),
            prompt=prompt,
            token_estimate=estimate_tokens(prompt),
            fingerprint=fingerprint_blocks(blocks),
        )

    def complete(
        self,
        request: ModelRequest,
        validator: Optional[Callable[[Any], None]] = None,
    ) -> ModelResponse:
        """Run one schema-bound call with the bounded repair loop.

        ``validator`` may impose operation-level constraints on the parsed
        value by raising ``structured.OutputInvalid``; failures count against
        the same repair budget as schema violations.
        """
        max_attempts = 1 + self.config.repair_attempts
        prompt = request.prompt
        raw_attempts: list[str] = []
        last_error = ""
        for attempt in range(1, max_attempts + 1):
            started = time.monotonic()
            text = self._send(request, prompt)
            latency_ms = int((time.monotonic() - started) * 1000)
            raw_attempts.append(text)
            try:
                value = structured.parse_output(request.kind.value, text)
                if validator is not None:
                    validator(value)
            except structured.OutputInvalid as exc:
                last_error = str(exc)
                self._journal(request, attempt, "invalid", latency_ms)
                prompt = request.prompt + _REPAIR_SUFFIX.format(output=text, error=last_error)
                continue
            self._journal(request, attempt, "ok", latency_ms)
            return ModelResponse(text=text, value=value, attempts=attempt)
        raise StructuredOutputError(
            f"{request.kind.value} output invalid after {max_attempts} attempts: {last_error}",
            raw_attempts,
        )

    def _send(self, request: ModelRequest, prompt: str) -> str:
        if self._slots is not None:
            with self._slots:
                return self.provider.send(
                    request.kind.value, prompt, request.attachments, fingerprint=request.fingerprint
                )
        return self.provider.send(
            request.kind.value, prompt, request.attachments, fingerprint=request.fingerprint
        )

    def _journal(self, request: ModelRequest, attempt: int, status: str, latency_ms: int = 0):
        entry = {
            "attempt": attempt,
            "fingerprint": request.fingerprint,
            "kind": request.kind.value,
            "latency_ms": latency_ms,
            "status": status,
        }
        with self._lock:
            self.journal.append(entry)

    def note(self, entry: dict):
        """Append an operation-level event to the journal."""
        with self._lock:
            self.journal.append(entry)

    def warn(self, message: str):
        with self._lock:
            self.warnings.append(message)
