"""Model provider adapters.

The adapter contract is ``send(kind, prompt, attachments, *, fingerprint)``
returning response text; transport failures raise ProviderError (retryable).
ScriptedProvider is the deterministic mock used by tests and hermetic runs:
a pure function of (kind, fingerprint/prompt), scriptable from an in-memory
table or a fixtures directory.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from pathlib import Path
from typing import Callable

from ..errors import ProviderError

Handler = Callable[[str, tuple[str, ...]], str]


class ScriptedProvider:
    """Deterministic scripted provider.

    Resolution order for each call:

    1. exact ``(kind, fingerprint)`` entry
    2. next queued response for the kind (FIFO)
    3. kind handler (a pure function of the rendered prompt)
    4. kind default (reused indefinitely)

    Anything unresolved raises ProviderError, which surfaces missing scripts
    loudly instead of fabricating output.
    """

    name = "scripted"

    def __init__(
        self,
        *,
        responses: dict[str, list[str]] | None = None,
        by_fingerprint: dict[tuple[str, str], str] | None = None,
        handlers: dict[str, Handler] | None = None,
        defaults: dict[str, str] | None = None,
        model_id: str = "scripted-v1",
        max_inflight: int | None = None,
    ):
        self._queues = {k: list(v) for k, v in (responses or {}).items()}
        self._by_fingerprint = dict(by_fingerprint or {})
        self._handlers = dict(handlers or {})
        self._defaults = dict(defaults or {})
        self.model_id = model_id
        self.max_inflight = max_inflight
        self._lock = threading.Lock()
        self.calls: list[dict] = []

    @classmethod
    def from_dir(cls, path: str | Path, **kwargs) -> "ScriptedProvider":
        """Load scripts from a fixtures directory.

        File naming: ``<kind>__<fingerprint>.txt`` for exact entries,
        ``<kind>__seqNN.txt`` for ordered FIFO responses, and
        ``<kind>__default.txt`` for a reusable default. An optional
        ``_meta.json`` carries the recorded model identity so replays keep
        the original provenance.
        """
        responses: dict[str, list[str]] = {}
        by_fingerprint: dict[tuple[str, str], str] = {}
        defaults: dict[str, str] = {}
        base = Path(path)
        if not base.is_dir():
            raise ProviderError(f"script directory not found: {base}")
        meta_file = base / "_meta.json"
        if meta_file.is_file() and "model_id" not in kwargs:
            try:
                kwargs["model_id"] = json.loads(meta_file.read_text(encoding="utf-8"))["model_id"]
            except (ValueError, KeyError) as exc:
                raise ProviderError(f"bad script manifest {meta_file}: {exc}") from exc
        for file in sorted(base.glob("*.txt")):
            stem = file.stem
            if "__" not in stem:
                continue
            kind, _, key = stem.partition("__")
            text = file.read_text(encoding="utf-8")
            if key == "default":
                defaults[kind] = text
            elif key.startswith("seq"):
                responses.setdefault(kind, []).append(text)
            else:
                by_fingerprint[(kind, key)] = text
        return cls(responses=responses, by_fingerprint=by_fingerprint, defaults=defaults, **kwargs)

    def send(self, kind: str, prompt: str, attachments=(), *, fingerprint: str = "") -> str:
        with self._lock:
            self.calls.append({"kind": kind, "fingerprint": fingerprint})
            if (kind, fingerprint) in self._by_fingerprint:
                return self._by_fingerprint[(kind, fingerprint)]
            queue = self._queues.get(kind)
            if queue:
                return queue.pop(0)
        handler = self._handlers.get(kind)
        if handler is not None:
            return handler(prompt, tuple(attachments))
        if kind in self._defaults:
            return self._defaults[kind]
        raise ProviderError(f"no scripted response for kind={kind} fingerprint={fingerprint}")


class RecordingProvider:
    """Wraps a provider and captures its traffic for later export."""

    def __init__(self, inner):
        self.inner = inner
        self.name = getattr(inner, "name", "recording")
        self.model_id = getattr(inner, "model_id", "unknown")
        self.max_inflight = getattr(inner, "max_inflight", None)
        self.traffic: list[dict] = []
        self._lock = threading.Lock()

    def send(self, kind: str, prompt: str, attachments=(), *, fingerprint: str = "") -> str:
        text = self.inner.send(kind, prompt, attachments, fingerprint=fingerprint)
        with self._lock:
            self.traffic.append({"fingerprint": fingerprint, "kind": kind, "response": text})
        return text

    def dump_dir(self, path: str | Path):
        """Write captured traffic as a fixtures directory (fingerprint-keyed)."""
        base = Path(path)
        base.mkdir(parents=True, exist_ok=True)
        (base / "_meta.json").write_text(
            json.dumps({"model_id": self.model_id}, sort_keys=True), encoding="utf-8"
        )
        for entry in self.traffic:
            name = f"{entry['kind']}__{entry['fingerprint']}.txt"
            (base / name).write_text(entry["response"], encoding="utf-8")


class HttpProvider:
    """Minimal JSON-over-HTTP provider adapter.

    POSTs ``{"model", "kind", "prompt", "attachments"}`` to ``<base>/complete``
    and expects ``{"text": ...}`` back. Configured via PROVIDER_BASE_URL,
    PROVIDER_MODEL, PROVIDER_API_KEY.
    """

    name = "http"

    def __init__(self, base_url: str, model_id: str = "default", api_key: str = "", timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.api_key = api_key
        self.timeout = timeout
        self.max_inflight = 4

    def send(self, kind: str, prompt: str, attachments=(), *, fingerprint: str = "") -> str:
        payload = json.dumps(
            {
                "attachments": list(attachments),
                "kind": kind,
                "model": self.model_id,
                "prompt": prompt,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/complete",
            data=payload,
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}),
            },
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderError(f"provider transport failure: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ProviderError("provider returned no text field")
        return body["text"]


def resolve_provider(env: dict) -> ScriptedProvider | HttpProvider:
    """Build a provider from PROVIDER_* environment variables."""
    name = env.get("PROVIDER_NAME", "scripted")
    if name == "scripted":
        script_dir = env.get("PROVIDER_SCRIPT_DIR")
        if not script_dir:
            raise ProviderError("scripted provider requires PROVIDER_SCRIPT_DIR")
        return ScriptedProvider.from_dir(script_dir)
    if name == "http":
        base_url = env.get("PROVIDER_BASE_URL")
        if not base_url:
            raise ProviderError("http provider requires PROVIDER_BASE_URL")
        return HttpProvider(
            base_url,
            model_id=env.get("PROVIDER_MODEL", "default"),
            api_key=env.get("PROVIDER_API_KEY", ""),
        )
    raise ProviderError(f"unknown provider {name!r}")
