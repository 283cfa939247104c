"""Storyboard planning and narration writing.

Storyboard planning is two-phase: a freeform reasoning call analyzing tone,
perspective, and scope, then a structuring call that emits the section list.
Asking for both at once measurably degrades structure quality, hence the
split.
"""

from __future__ import annotations

import re

from ..errors import PreconditionError
from ..gateway.core import ModelGateway, PromptKind
from ..model import NarrationSegment, NarrativeIndex, Storyboard, StoryboardSection
from ..qa import DEFAULT_QA_BUDGET, format_index_prompt
from .adapters import NARRATION_WORDS_PER_SECOND


def plan_storyboard(index: NarrativeIndex, prompt: str, gateway: ModelGateway) -> Storyboard:
    """Compile a user prompt into an ordered storyboard."""
    if not prompt or not prompt.strip():
        raise PreconditionError("editing prompt must be non-empty")
    index_text = format_index_prompt(index, DEFAULT_QA_BUDGET)

    reasoning = gateway.complete(
        gateway.request(
            PromptKind.STORYBOARD_REASON, [("index", index_text), ("prompt", prompt)]
        )
    ).value

    value = gateway.complete(
        gateway.request(
            PromptKind.STORYBOARD_STRUCTURE,
            [("index", index_text), ("prompt", prompt), ("reasoning", reasoning)],
        )
    ).value
    sections = tuple(
        StoryboardSection(
            section_id=f"s-{i:03d}",
            intent=sec["intent"],
            tone=sec["tone"],
            target_duration_ms=sec["target_duration_ms"],
            mode=sec["mode"],
        )
        for i, sec in enumerate(value["sections"])
    )
    return Storyboard(sections)


def word_count(text: str) -> int:
    return len(re.findall(r"\S+", text))


def estimate_narration_ms(text: str) -> int:
    """Standard narration pace until TTS supplies actual durations."""
    return round(word_count(text) / NARRATION_WORDS_PER_SECOND * 1000)


def write_narration(storyboard: Storyboard, gateway: ModelGateway) -> list[NarrationSegment]:
    """One voiceover segment per storyboard section, in section order."""
    if not storyboard.sections:
        raise PreconditionError("storyboard has no sections")
    segments = []
    for i, section in enumerate(storyboard.sections):
        text = gateway.complete(
            gateway.request(
                PromptKind.NARRATE,
                [
                    (
                        "section",
                        f"intent: {section.intent}\ntone: {section.tone}\n"
                        f"target duration: {section.target_duration_ms / 1000:.0f} seconds",
                    )
                ],
            )
        ).value
        segments.append(
            NarrationSegment(
                narration_id=f"n-{i:03d}",
                text=text,
                storyboard_section_id=section.section_id,
                audio_uri=None,
                est_duration_ms=estimate_narration_ms(text),
            )
        )
    return segments
