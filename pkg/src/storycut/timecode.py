"""Millisecond timestamps and time ranges.

All pipeline arithmetic happens on integer milliseconds so cut boundaries
stay lossless; serialized artifacts render timestamps as "HH:MM:SS.mmm".
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_TS_RE = re.compile(r"^(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})$")


def ms_from_seconds(seconds: float | int) -> int:
    """Convert seconds to integer milliseconds (round half away handled by round)."""
    return round(seconds * 1000)


def format_ms(ms: int) -> str:
    """Render milliseconds as "HH:MM:SS.mmm"; hours widen past 99 as needed."""
    if ms < 0:
        raise ValueError(f"negative timestamp: {ms}")
    s, milli = divmod(ms, 1000)
    m, sec = divmod(s, 60)
    h, minute = divmod(m, 60)
    return f"{h:02d}:{minute:02d}:{sec:02d}.{milli:03d}"


def parse_ms(text: str) -> int:
    """Parse "HH:MM:SS.mmm" into integer milliseconds."""
    m = _TS_RE.match(text)
    if not m:
        raise ValueError(f"bad timestamp {text!r}, expected HH:MM:SS.mmm")
    h, minute, sec, milli = (int(g) for g in m.groups())
    return ((h * 60 + minute) * 60 + sec) * 1000 + milli


@dataclass(frozen=True, order=True)
class TimeRange:
    """Half-open-in-spirit [start, end] span in integer milliseconds, start < end."""

    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValueError(f"range start must be >= 0, got {self.start_ms}")
        if self.start_ms >= self.end_ms:
            raise ValueError(f"range start must precede end: [{self.start_ms}, {self.end_ms}]")

    @classmethod
    def from_seconds(cls, start: float, end: float) -> "TimeRange":
        return cls(ms_from_seconds(start), ms_from_seconds(end))

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    @property
    def start_seconds(self) -> float:
        return self.start_ms / 1000

    @property
    def end_seconds(self) -> float:
        return self.end_ms / 1000

    def contains(self, at_ms: int) -> bool:
        return self.start_ms <= at_ms <= self.end_ms

    def overlap_ms(self, other: "TimeRange") -> int:
        return max(0, min(self.end_ms, other.end_ms) - max(self.start_ms, other.start_ms))

    def to_json(self) -> dict:
        return {"end": format_ms(self.end_ms), "start": format_ms(self.start_ms)}

    @classmethod
    def from_json(cls, obj: dict) -> "TimeRange":
        return cls(parse_ms(obj["start"]), parse_ms(obj["end"]))

    def __str__(self) -> str:
        return f"{format_ms(self.start_ms)}..{format_ms(self.end_ms)}"
