"""Canonical JSON serialization for persisted artifacts.

Canonical form is UTF-8, sorted keys, compact separators, LF line endings,
one trailing newline. Determinism tests compare artifact bytes directly, so
every writer must go through this module.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import ParseError


def canonical_dumps(obj: Any) -> bytes:
    """Serialize to canonical JSON bytes."""
    text = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)
    return text.encode("utf-8") + b"\n"


def canonical_loads(data: bytes | str) -> Any:
    """Parse JSON, mapping syntax errors to ParseError with a byte offset."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}", offset=exc.start) from exc
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON at byte {offset}: {exc.msg}", offset=offset) from exc


def content_hash(data: bytes) -> str:
    """SHA-256 hex digest of artifact bytes."""
    return hashlib.sha256(data).hexdigest()


def stable_digest(obj: Any) -> str:
    """Digest of an object's canonical serialization."""
    return content_hash(canonical_dumps(obj))
