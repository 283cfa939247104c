"""Plan post-processors: beat alignment, micro-cut refinement, subtitles.

All transforms are idempotent, validity-preserving, and deterministic. They
never change clip count, order, or rendering modes; only boundary
timestamps move. Warnings go to the journal (or logger), never into the
plan, so re-application yields identical bytes.
"""

from __future__ import annotations

import logging
import re
from dataclasses import replace

from ..config import PipelineConfig
from ..model import BeatGrid, EditPlan, NarrationSegment, SubtitleCue, finalize_artifact
from ..timecode import TimeRange
from .retrieval import MIN_CLIP_MS

logger = logging.getLogger(__name__)

SUBTITLE_LINE_CHARS = 42
SUBTITLE_MAX_CHARS = 2 * SUBTITLE_LINE_CHARS

_MAX_CUT_WALK = 64


def _refinalize(plan: EditPlan, entries) -> EditPlan:
    updated = replace(plan, entries=tuple(entries))
    doc = finalize_artifact(updated.to_json(), plan.meta.get("created_at"))
    return EditPlan.from_json(doc)


def _output_cuts(entries) -> list[int]:
    """Interior cut positions on the output timeline (between entries)."""
    cuts = []
    acc = 0
    for entry in entries[:-1]:
        acc += entry.source.duration_ms
        cuts.append(acc)
    return cuts


def narration_spans(plan: EditPlan) -> list[tuple[int, int]]:
    """Output-timeline spans where narration audio plays.

    Narration audio covers its bound clips (the render overlays it over
    exactly those), so each span is the output extent of one maximal run of
    consecutive entries sharing a narration binding.
    """
    spans: list[tuple[int, int]] = []
    acc = 0
    run_start = None
    run_id = None
    for entry in plan.entries:
        end = acc + entry.source.duration_ms
        if entry.narration_id is not None:
            if run_id == entry.narration_id:
                spans[-1] = (run_start, end)
            else:
                run_start, run_id = acc, entry.narration_id
                spans.append((acc, end))
        else:
            run_id, run_start = None, None
        acc = end
    return spans


def beat_align(plan: EditPlan, grid: BeatGrid, config: PipelineConfig, journal: list | None = None) -> EditPlan:
    """Snap interior output cuts to the nearest beat within the snap window.

    A move transfers the delta across the junction (previous clip's source
    end and next clip's source start shift together) so every other cut
    keeps its position. Moves abort when the shifted cut would land strictly
    inside a narration audio span or would violate source bounds or the
    minimum clip length.
    """
    entries = list(plan.entries)
    if len(entries) < 2 or not grid.beats_ms:
        return plan
    window = config.beat_snap_window_ms
    cuts = _output_cuts(entries)
    spans = narration_spans(plan)
    assets = plan.meta.get("assets", {})
    moved = False

    for k, cut in enumerate(cuts, start=1):
        beat = min(grid.beats_ms, key=lambda b: (abs(b - cut), b))
        delta = beat - cut
        if delta == 0 or abs(delta) > window:
            continue
        if any(start < beat < end for start, end in spans):
            _note(journal, f"beat_align: cut at {cut} ms kept; beat {beat} ms interrupts narration")
            continue
        prev, nxt = entries[k - 1], entries[k]
        new_prev_end = prev.source.end_ms + delta
        new_next_start = nxt.source.start_ms + delta
        prev_limit = int(assets.get(prev.asset_id, prev.source.end_ms + max(delta, 0)))
        if new_prev_end > prev_limit or new_prev_end < prev.source.start_ms + MIN_CLIP_MS:
            continue
        if new_next_start < 0 or new_next_start > nxt.source.end_ms - MIN_CLIP_MS:
            continue
        entries[k - 1] = replace(prev, source=TimeRange(prev.source.start_ms, new_prev_end))
        entries[k] = replace(nxt, source=TimeRange(new_next_start, nxt.source.end_ms))
        moved = True
    if not moved:
        return plan
    return _refinalize(plan, entries)


# --- micro-cut refinement -----------------------------------------------------


def _containing_span(spans, cut: int):
    for span in spans:
        if span.start_ms < cut < span.end_ms:
            return span
    return None


def _walk_end_cut(cut: int, spans, pad: int, limit: int) -> int:
    """Move an end cut out of spoken words, preferring span end + pad."""
    span = _containing_span(spans, cut)
    if span is None:
        return cut
    candidate = span.end_ms + pad
    for _ in range(_MAX_CUT_WALK):
        inside = _containing_span(spans, candidate)
        if inside is None:
            break
        candidate = inside.end_ms + pad
    if candidate <= limit:
        return candidate
    candidate = span.start_ms - pad
    for _ in range(_MAX_CUT_WALK):
        inside = _containing_span(spans, candidate)
        if inside is None:
            break
        candidate = inside.start_ms - pad
    return candidate


def _walk_start_cut(cut: int, spans, pad: int) -> int:
    """Move a start cut out of spoken words toward span start - pad."""
    span = _containing_span(spans, cut)
    if span is None:
        return cut
    candidate = span.start_ms - pad
    for _ in range(_MAX_CUT_WALK):
        if candidate <= 0:
            return 0
        inside = _containing_span(spans, candidate)
        if inside is None:
            break
        candidate = inside.start_ms - pad
    return max(candidate, 0)


def micro_cut_refine(
    plan: EditPlan,
    transcripts: dict[str, list] | None,
    config: PipelineConfig,
    journal: list | None = None,
) -> EditPlan:
    """Shift source cuts off spoken words at millisecond precision.

    End cuts inside a word span move to span end + pad (falling back to span
    start - pad at media bounds); start cuts move to span start - pad. Clips
    never shrink below 0.5 s; assets without transcripts pass through with a
    warning.
    """
    transcripts = transcripts or {}
    pad = config.microcut_pad_ms
    assets = plan.meta.get("assets", {})
    entries = []
    warned: set[str] = set()
    changed = False
    for entry in plan.entries:
        spans = transcripts.get(entry.asset_id)
        if spans is None:
            if entry.asset_id not in warned:
                warned.add(entry.asset_id)
                _note(journal, f"micro_cut: no transcript for asset {entry.asset_id}; passed through")
            entries.append(entry)
            continue
        limit = int(assets.get(entry.asset_id, entry.source.end_ms))
        start = _walk_start_cut(entry.source.start_ms, spans, pad)
        end = _walk_end_cut(entry.source.end_ms, spans, pad, limit)
        end = min(end, limit)
        if end - start < MIN_CLIP_MS:
            end = entry.source.end_ms
        if end - start < MIN_CLIP_MS:
            start = entry.source.start_ms
        if (start, end) != (entry.source.start_ms, entry.source.end_ms):
            changed = True
            entry = replace(entry, source=TimeRange(start, end))
        entries.append(entry)
    if not changed:
        return plan
    return _refinalize(plan, entries)


def _note(journal: list | None, message: str):
    logger.warning(message)
    if journal is not None:
        journal.append({"kind": "warning", "message": message})


# --- subtitles -----------------------------------------------------------------


def _split_to_fit(text: str, limit: int) -> list[str]:
    text = text.strip()
    if len(text) <= limit:
        return [text] if text else []
    mid = len(text) / 2
    spaces = [m.start() for m in re.finditer(r" ", text)]
    if not spaces:
        return [text[:limit]] + _split_to_fit(text[limit:], limit)
    best = min(spaces, key=lambda i: (abs(i - mid), i))
    return _split_to_fit(text[:best], limit) + _split_to_fit(text[best + 1 :], limit)


def _clauses(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?;:,])\s+", text.strip())
    return [p for p in (part.strip() for part in parts) if p]


def _wrap_cue(text: str) -> str:
    if len(text) <= SUBTITLE_LINE_CHARS:
        return text
    spaces = [m.start() for m in re.finditer(r" ", text)]
    mid = len(text) / 2
    candidates = [i for i in spaces if i <= SUBTITLE_LINE_CHARS and len(text) - i - 1 <= SUBTITLE_LINE_CHARS]
    if candidates:
        best = min(candidates, key=lambda i: (abs(i - mid), i))
        return text[:best] + "\n" + text[best + 1 :]
    return text[:SUBTITLE_LINE_CHARS] + "\n" + text[SUBTITLE_LINE_CHARS : SUBTITLE_MAX_CHARS]


def generate_subtitles(plan: EditPlan, narration: list[NarrationSegment]) -> list[SubtitleCue]:
    """Chunk narration into cues and allocate spans proportionally.

    Narration text splits at clause boundaries (clauses above 84 chars split
    at the space nearest their midpoint); cue spans are allocated across the
    narration's output span proportionally to chunk length.
    """
    spans: dict[str, list[int]] = {}
    acc = 0
    for entry in plan.entries:
        end = acc + entry.source.duration_ms
        if entry.narration_id is not None:
            if entry.narration_id in spans:
                spans[entry.narration_id][1] = end
            else:
                spans[entry.narration_id] = [acc, end]
        acc = end

    cues: list[SubtitleCue] = []
    for seg in narration:
        span = spans.get(seg.narration_id)
        if span is None or not seg.text.strip():
            continue
        chunks: list[str] = []
        for clause in _clauses(seg.text):
            chunks.extend(_split_to_fit(clause, SUBTITLE_MAX_CHARS))
        if not chunks:
            continue
        span_len = span[1] - span[0]
        total_ms = min(seg.est_duration_ms or span_len, span_len)
        weights = [len(c) for c in chunks]
        total_w = sum(weights)
        bounds = [span[0]]
        running = 0
        for w in weights:
            running += w
            bounds.append(span[0] + round(total_ms * running / total_w))
        for i, chunk in enumerate(chunks):
            if bounds[i] < bounds[i + 1]:
                cues.append(SubtitleCue(TimeRange(bounds[i], bounds[i + 1]), _wrap_cue(chunk)))
    cues.sort(key=lambda c: c.range.start_ms)
    return cues


def dynamic_crop(plan: EditPlan, pose_adapter=None, journal: list | None = None) -> EditPlan:
    """Optional reframing slot; the default is a no-op pass-through.

    A pose-estimation adapter can be plugged here to track and frame key
    subjects; none ships.
    """
    if pose_adapter is None:
        return plan
    return pose_adapter.reframe(plan)
