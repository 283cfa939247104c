"""Clip retrieval and alignment against narration, plus rendering-mode rules."""

from __future__ import annotations

import logging

from ..config import PipelineConfig
from ..errors import PreconditionError, RetrievalError
from ..gateway.core import ModelGateway, PromptKind
from ..gateway.structured import OutputInvalid
from ..model import ClipSelection, MusicRef, NarrationSegment, NarrativeIndex, RenderingMode
from ..timecode import TimeRange
from .adapters import MusicTrack

logger = logging.getLogger(__name__)

DURATION_BAND = (0.8, 1.5)
MIN_CLIP_MS = 500

_MONTAGE_WORDS = frozenset({"montage", "b-roll", "broll", "montage-style"})
_RAW_AUDIO_WORDS = frozenset(
    {"dialogue", "speech", "quote", "confession", "argument", "reaction", "emotional", "emotionally", "salient"}
)
_OVERLAY_WORDS = frozenset(
    {"exposition", "overview", "context", "establish", "establishing", "summary", "transition", "recap"}
)


def _traces_text(index: NarrativeIndex) -> str:
    return "\n".join(scene.prompt_text() for scene in index.scenes)


def retrieve_and_align(
    narration: NarrationSegment,
    index: NarrativeIndex,
    gateway: ModelGateway,
    config: PipelineConfig | None = None,
) -> list[ClipSelection]:
    """Pick source spans for one narration segment and fit their duration.

    The model sees the narration and the full timestamped traces. Range
    violations are repaired through the gateway loop; a total duration
    outside [0.8, 1.5] x narration estimate earns one re-prompt, after which
    the selection is clamped (final clip trimmed, or extended when short).
    """
    config = config or gateway.config
    asset_id = index.primary_asset_id()
    duration_ms = index.asset_duration_ms(asset_id) or index.duration_ms()

    def _in_bounds(value):
        for i, clip in enumerate(value["clips"]):
            if clip["end_ms"] > duration_ms:
                raise OutputInvalid(
                    f"clips[{i}] ends at {clip['end_ms'] / 1000:.3f}s but the media is "
                    f"{duration_ms / 1000:.3f}s long"
                )

    base_blocks = [
        ("narration", f"{narration.text}\n(estimated duration: {narration.est_duration_ms / 1000:.1f}s)"),
        ("traces", _traces_text(index)),
    ]
    request = gateway.request(PromptKind.RETRIEVE_CLIPS, base_blocks)
    value = gateway.complete(request, validator=_in_bounds).value

    low = round(DURATION_BAND[0] * narration.est_duration_ms)
    high = round(DURATION_BAND[1] * narration.est_duration_ms)

    def _total(clips) -> int:
        return sum(c["end_ms"] - c["start_ms"] for c in clips)

    if not value["clips"] or not (low <= _total(value["clips"]) <= high):
        problem = (
            "no clips were selected"
            if not value["clips"]
            else f"total clip duration {_total(value['clips']) / 1000:.1f}s is outside "
            f"[{low / 1000:.1f}s, {high / 1000:.1f}s]"
        )
        retry = gateway.request(PromptKind.RETRIEVE_CLIPS, base_blocks + [("error", problem)])
        value = gateway.complete(retry, validator=_in_bounds).value

    clips = value["clips"]
    if not clips:
        raise RetrievalError(f"no clips retrieved for section {narration.storyboard_section_id}")
    clips = _clamp_duration(clips, low, high, duration_ms, narration, gateway)

    return [
        ClipSelection(
            asset_id=asset_id,
            source=TimeRange(c["start_ms"], c["end_ms"]),
            output_position=0,  # assigned at assembly
            justification=c["justification"],
            narrative_function=c["narrative_function"],
        )
        for c in clips
    ]


def _clamp_duration(clips, low, high, media_ms, narration, gateway) -> list[dict]:
    total = sum(c["end_ms"] - c["start_ms"] for c in clips)
    if total > high:
        kept, acc = [], 0
        for clip in clips:
            length = clip["end_ms"] - clip["start_ms"]
            if acc + length <= high:
                kept.append(clip)
                acc += length
                continue
            room = high - acc
            if room >= MIN_CLIP_MS:
                trimmed = dict(clip)
                trimmed["end_ms"] = clip["start_ms"] + room
                kept.append(trimmed)
            break
        return kept
    if total < low:
        last = dict(clips[-1])
        deficit = low - total
        extend = min(deficit, media_ms - last["end_ms"])
        last["end_ms"] += extend
        deficit -= extend
        if deficit > 0:
            backward = min(deficit, last["start_ms"])
            last["start_ms"] -= backward
            deficit -= backward
        if deficit > 0:
            gateway.warn(
                f"section {narration.storyboard_section_id}: selection is "
                f"{deficit / 1000:.1f}s short of the pacing band even after extension"
            )
        return clips[:-1] + [last]
    return clips


def assign_rendering_mode(clip: ClipSelection, gateway=None) -> RenderingMode:
    """Classify a clip's audio treatment from its narrative function.

    Lexical rules; the default absorbs every failure, so this never raises
    past the precondition. The gateway parameter is a seam for a model-backed
    classifier and is unused by the lexical rules.
    """
    if not clip.narrative_function or not clip.narrative_function.strip():
        raise PreconditionError("clip has no narrative_function text")
    tokens = set(clip.narrative_function.casefold().replace(",", " ").split())
    if tokens & _MONTAGE_WORDS:
        return RenderingMode.UNTRIMMED
    if tokens & _RAW_AUDIO_WORDS:
        return RenderingMode.RAW_AUDIO
    if tokens & _OVERLAY_WORDS:
        return RenderingMode.NARRATED_OVERLAY
    return RenderingMode.NARRATED_OVERLAY  # abstain


def select_music(
    tones: list[str],
    tracks: list[MusicTrack],
    gateway: ModelGateway | None = None,
    prompt: str = "",
) -> MusicRef | None:
    """Keyword-match storyboard tones against the local track manifest.

    When a gateway is available, a MusicSelect call expands the tone labels
    into richer keywords first; failures fall back to the raw tones.
    """
    keywords = {t.casefold() for t in tones}
    if gateway is not None:
        try:
            value = gateway.complete(
                gateway.request(
                    PromptKind.MUSIC_SELECT,
                    [("tones", ", ".join(sorted(keywords))), ("prompt", prompt or "(none)")],
                )
            ).value
            keywords |= set(value["keywords"])
        except Exception as exc:  # music is optional; never fail the pipeline on it
            logger.warning("music keyword expansion failed: %s", exc)
    best: tuple[int, str] | None = None
    best_track = None
    for track in tracks:
        score = len(keywords & set(track.keywords))
        if score == 0:
            continue
        key = (-score, track.track_id)
        if best is None or key < best:
            best = key
            best_track = track
    if best_track is None:
        return None
    return MusicRef(track_id=best_track.track_id, uri=best_track.uri)
