"""External service adapters for the edit pipeline.

Contracts: TTS synthesize(text, voice) -> audio bytes + duration;
transcriber transcribe(asset, range) -> word spans; beat detector
beats(track) -> timestamps. The shipped implementations are deterministic
fixture/synthetic mocks so the whole pipeline runs hermetically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..canonical import canonical_dumps, content_hash
from ..timecode import TimeRange

NARRATION_WORDS_PER_SECOND = 2.5


@dataclass(frozen=True)
class TTSResult:
    data: bytes
    ext: str
    duration_ms: int


@dataclass(frozen=True)
class WordSpan:
    word: str
    start_ms: int
    end_ms: int


class MockTTS:
    """Synthesizes a synthetic-audio descriptor at standard narration pace."""

    name = "mock-tts"

    def synthesize(self, text: str, voice: str = "narrator") -> TTSResult:
        words = len(text.split())
        duration_ms = round(words / NARRATION_WORDS_PER_SECOND * 1000)
        descriptor = {
            "duration_ms": duration_ms,
            "synthetic_audio": True,
            "text_hash": content_hash(text.encode("utf-8"))[:16],
            "voice": voice,
        }
        return TTSResult(data=canonical_dumps(descriptor), ext=".json", duration_ms=duration_ms)


class FixtureTranscriber:
    """Word spans served from an in-memory or JSON fixture, keyed by asset id."""

    name = "fixture-transcriber"

    def __init__(self, spans_by_asset: dict[str, list[WordSpan]] | None = None):
        self.spans_by_asset = spans_by_asset or {}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureTranscriber":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        spans = {
            asset_id: [WordSpan(w["word"], int(w["start_ms"]), int(w["end_ms"])) for w in words]
            for asset_id, words in doc.items()
        }
        return cls(spans)

    def transcribe(self, asset_id: str, rng: TimeRange | None = None) -> list[WordSpan] | None:
        spans = self.spans_by_asset.get(asset_id)
        if spans is None:
            return None
        if rng is None:
            return list(spans)
        return [s for s in spans if s.end_ms > rng.start_ms and s.start_ms < rng.end_ms]


class FixtureBeatDetector:
    """Beat timestamps from a fixture mapping, or a constant-tempo fallback."""

    name = "fixture-beats"

    def __init__(self, beats_by_track: dict[str, list[int]] | None = None, default_bpm: float | None = None):
        self.beats_by_track = beats_by_track or {}
        self.default_bpm = default_bpm

    def beats(self, track_uri: str, duration_ms: int | None = None) -> list[int]:
        if track_uri in self.beats_by_track:
            return list(self.beats_by_track[track_uri])
        if self.default_bpm and duration_ms:
            step = round(60000 / self.default_bpm)
            return list(range(step, duration_ms + 1, step))
        return []


@dataclass(frozen=True)
class MusicTrack:
    track_id: str
    uri: str
    keywords: tuple[str, ...]
    bpm: float | None = None


def load_track_manifest(path: str | Path) -> list[MusicTrack]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        MusicTrack(
            track_id=t["track_id"],
            uri=t["uri"],
            keywords=tuple(k.casefold() for k in t.get("keywords", ())),
            bpm=t.get("bpm"),
        )
        for t in doc.get("tracks", [])
    ]
