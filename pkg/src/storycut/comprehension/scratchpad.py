"""Coarse comprehension: rolling scratchpad with guided context compression.

The scratchpad is the persistent memory carried across macro segments. Each
segment pass merges new narrative state into it; whenever the rendered
scratchpad exceeds its token budget, a compression model call distills it
while preserving every character name.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..config import PipelineConfig
from ..errors import BudgetError, PreconditionError
from ..gateway.core import ModelGateway, PromptKind, estimate_tokens
from ..media import SegmentArtifact
from ..model import SCHEMA_VERSION
from ..timecode import TimeRange

_REINSERTED_DESCRIPTION_CHARS = 60


@dataclass(frozen=True)
class Scratchpad:
    """Rolling compressed memory: format, setting, premise, cast, threads."""

    media_format: str
    setting: str
    premise: str
    characters: tuple[tuple[str, str], ...]  # (name, description), insertion-ordered
    dynamics: tuple[str, ...]
    open_threads: tuple[str, ...]

    def character_names(self) -> set[str]:
        return {name for name, _ in self.characters}

    def render_text(self) -> str:
        lines = [
            f"media_format: {self.media_format}",
            f"setting: {self.setting}",
            f"premise: {self.premise}",
            "characters:",
        ]
        lines += [f"- {name}: {description}" for name, description in self.characters]
        lines.append("dynamics:")
        lines += [f"- {d}" for d in self.dynamics]
        lines.append("open_threads:")
        lines += [f"- {t}" for t in self.open_threads]
        return "\n".join(lines)

    @property
    def token_estimate(self) -> int:
        return estimate_tokens(self.render_text())

    def to_json(self) -> dict:
        return {
            "characters": [{"description": d, "name": n} for n, d in self.characters],
            "dynamics": list(self.dynamics),
            "kind": "scratchpad",
            "media_format": self.media_format,
            "open_threads": list(self.open_threads),
            "premise": self.premise,
            "schema_version": SCHEMA_VERSION,
            "setting": self.setting,
            "token_estimate": self.token_estimate,
        }

    @classmethod
    def from_parsed(cls, value: dict) -> "Scratchpad":
        return cls(
            media_format=value["media_format"],
            setting=value["setting"],
            premise=value["premise"],
            characters=tuple((c["name"], c["description"]) for c in value["characters"]),
            dynamics=tuple(value["dynamics"]),
            open_threads=tuple(value["open_threads"]),
        )


def _segment_block(segment: SegmentArtifact) -> tuple[str, str]:
    return ("segment", f"uri: {segment.uri}\nrange: {segment.range}")


def bootstrap_scratchpad(segment: SegmentArtifact, gateway: ModelGateway) -> Scratchpad:
    """Establish the narrative scaffold from the temporally first macro segment.

    An over-budget bootstrap goes straight through compression so the budget
    invariant holds from the first update cycle on.
    """
    if segment.range.start_ms != 0:
        raise PreconditionError(
            f"bootstrap requires the first macro segment, got one starting at {segment.range}"
        )
    request = gateway.request(
        PromptKind.BOOTSTRAP_SCRATCHPAD, [_segment_block(segment)], attachments=(segment.uri,)
    )
    pad = Scratchpad.from_parsed(gateway.complete(request).value)
    if pad.token_estimate > gateway.config.scratchpad_budget:
        pad = compress_scratchpad(pad, gateway, gateway.config)
    return pad


def _merge_characters(
    existing: tuple[tuple[str, str], ...], new: list[dict]
) -> tuple[tuple[str, str], ...]:
    merged = list(existing)
    index = {name.casefold(): i for i, (name, _) in enumerate(merged)}
    for char in new:
        key = char["name"].casefold()
        if key in index:
            if char["description"]:
                i = index[key]
                merged[i] = (merged[i][0], char["description"])
        else:
            index[key] = len(merged)
            merged.append((char["name"], char["description"]))
    return tuple(merged)


def _merge_unique(existing: tuple[str, ...], new: list[str]) -> tuple[str, ...]:
    seen = {e.casefold() for e in existing}
    out = list(existing)
    for item in new:
        if item.casefold() not in seen:
            seen.add(item.casefold())
            out.append(item)
    return tuple(out)


def comprehend_segment(
    segment: SegmentArtifact,
    scratchpad: Scratchpad,
    gateway: ModelGateway,
    config: PipelineConfig,
) -> tuple[tuple[TimeRange, str], Scratchpad]:
    """Summarize one macro segment and fold its narrative state into memory.

    Returns the segment summary (bound to the segment range) and the updated
    scratchpad, compressed when it overruns the budget.
    """
    if scratchpad.token_estimate > config.scratchpad_budget:
        raise PreconditionError(
            f"scratchpad over budget before segment pass "
            f"({scratchpad.token_estimate} > {config.scratchpad_budget})"
        )
    request = gateway.request(
        PromptKind.SEGMENT_COMPREHEND,
        [("memory", scratchpad.render_text()), _segment_block(segment)],
        attachments=(segment.uri,),
    )
    value = gateway.complete(request).value

    resolved = {t.casefold() for t in value["resolved_threads"]}
    updated = replace(
        scratchpad,
        characters=_merge_characters(scratchpad.characters, value["new_characters"]),
        dynamics=_merge_unique(scratchpad.dynamics, value["dynamics"]),
        open_threads=_merge_unique(
            tuple(t for t in scratchpad.open_threads if t.casefold() not in resolved),
            value["open_threads"],
        ),
    )
    if updated.token_estimate > config.scratchpad_budget:
        updated = compress_scratchpad(updated, gateway, config)
    return (segment.range, value["summary"]), updated


def compress_scratchpad(
    scratchpad: Scratchpad, gateway: ModelGateway, config: PipelineConfig
) -> Scratchpad:
    """Distill an over-budget scratchpad; identity when already under budget.

    Character names always survive: any name the model drops is re-inserted
    with a truncated description. If the result still exceeds the budget
    after the repair attempts, raises BudgetError.
    """
    if scratchpad.token_estimate <= config.scratchpad_budget:
        return scratchpad

    names_before = list(scratchpad.characters)
    base_blocks = [
        ("memory", scratchpad.render_text()),
        ("budget", f"{config.scratchpad_budget} tokens"),
    ]
    feedback: list[tuple[str, str]] = []
    for _ in range(1 + config.repair_attempts):
        request = gateway.request(PromptKind.COMPRESS_SCRATCHPAD, base_blocks + feedback)
        candidate = Scratchpad.from_parsed(gateway.complete(request).value)
        candidate = _reinsert_missing_names(candidate, names_before, gateway)
        if candidate.token_estimate <= config.scratchpad_budget:
            return candidate
        feedback = [
            (
                "error",
                f"previous compression still estimated {candidate.token_estimate} tokens; "
                f"the budget is {config.scratchpad_budget}. Compress harder.",
            )
        ]
    raise BudgetError(
        f"scratchpad compression failed to reach {config.scratchpad_budget} tokens "
        f"after {1 + config.repair_attempts} attempts"
    )


def _reinsert_missing_names(
    candidate: Scratchpad, names_before: list[tuple[str, str]], gateway: ModelGateway
) -> Scratchpad:
    present = {name.casefold() for name in candidate.character_names()}
    restored = list(candidate.characters)
    for name, description in names_before:
        if name.casefold() not in present:
            gateway.warn(f"compression dropped character {name!r}; re-inserted")
            restored.append((name, description[:_REINSERTED_DESCRIPTION_CHARS]))
    if len(restored) == len(candidate.characters):
        return candidate
    return replace(candidate, characters=tuple(restored))
