"""Domain types shared across the pipeline.

Every type is an immutable value object; serialization targets canonical
JSON (see canonical.py). Absolute timestamps render as "HH:MM:SS.mmm",
durations as integer milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

from .canonical import canonical_dumps, content_hash
from .timecode import TimeRange, format_ms, parse_ms

SCHEMA_VERSION = 1

MEDIA_FORMATS = ("cinematic", "instructional", "keynote", "interview", "sports", "other")

UNATTRIBUTED = "unattributed"


@dataclass(frozen=True)
class MediaAsset:
    """Probed container metadata for one source file."""

    asset_id: str
    uri: str
    duration_ms: int
    width: int
    height: int
    fps: float
    has_audio: bool

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValueError(f"asset duration must be > 0, got {self.duration_ms}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"asset dimensions must be > 0, got {self.width}x{self.height}")

    def to_json(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "duration_ms": self.duration_ms,
            "fps": self.fps,
            "has_audio": self.has_audio,
            "height": self.height,
            "kind": "media_asset",
            "schema_version": SCHEMA_VERSION,
            "uri": self.uri,
            "width": self.width,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MediaAsset":
        return cls(
            asset_id=obj["asset_id"],
            uri=obj["uri"],
            duration_ms=obj["duration_ms"],
            width=obj["width"],
            height=obj["height"],
            fps=obj["fps"],
            has_audio=obj["has_audio"],
        )


@dataclass(frozen=True)
class Dialogue:
    """Paraphrased dialogue with speaker attribution."""

    speaker: str
    text: str

    def to_json(self) -> dict:
        return {"speaker": self.speaker, "text": self.text}


@dataclass(frozen=True)
class Affect:
    """Emotion label with intensity in [0, 1] (stored at 3 decimals)."""

    label: str
    intensity: float

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"affect intensity must be in [0,1], got {self.intensity}")
        object.__setattr__(self, "intensity", round(self.intensity, 3))

    def to_json(self) -> dict:
        return {"intensity": self.intensity, "label": self.label}


@dataclass(frozen=True)
class SemanticAnnotation:
    """One timestamped observation inside a scene trace.

    At least one of dialogue / visual / affect must be present; ``boundary``
    marks annotations anchored to a reported camera cut instead of the
    regular interval.
    """

    at_ms: int
    dialogue: Optional[Dialogue] = None
    speech_act: Optional[str] = None
    visual: Optional[str] = None
    affect: Optional[Affect] = None
    boundary: bool = False

    def __post_init__(self):
        if self.dialogue is None and not self.visual and self.affect is None:
            raise ValueError(f"annotation at {format_ms(self.at_ms)} carries no content")

    def text_content(self) -> str:
        """All textual content, used by lexical retrieval."""
        parts = []
        if self.dialogue is not None:
            parts.append(self.dialogue.speaker)
            parts.append(self.dialogue.text)
        if self.speech_act:
            parts.append(self.speech_act)
        if self.visual:
            parts.append(self.visual)
        if self.affect is not None:
            parts.append(self.affect.label)
        return " ".join(parts)

    def to_json(self) -> dict:
        return {
            "affect": self.affect.to_json() if self.affect else None,
            "at": format_ms(self.at_ms),
            "boundary": self.boundary,
            "dialogue": self.dialogue.to_json() if self.dialogue else None,
            "speech_act": self.speech_act,
            "visual": self.visual,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SemanticAnnotation":
        dialogue = obj.get("dialogue")
        affect = obj.get("affect")
        return cls(
            at_ms=parse_ms(obj["at"]),
            dialogue=Dialogue(dialogue["speaker"], dialogue["text"]) if dialogue else None,
            speech_act=obj.get("speech_act"),
            visual=obj.get("visual"),
            affect=Affect(affect["label"], affect["intensity"]) if affect else None,
            boundary=bool(obj.get("boundary", False)),
        )


@dataclass(frozen=True)
class SceneTrace:
    """Timestamped semantic trace for one scene window."""

    scene_id: str
    range: TimeRange
    annotations: tuple[SemanticAnnotation, ...]
    warnings: tuple[str, ...] = ()  # carried to index meta, not serialized per scene

    def prompt_text(self) -> str:
        """Readable trace rendering used inside model prompts."""
        lines = [f"Scene {self.scene_id} [{self.range}]"]
        for ann in self.annotations:
            parts = []
            if ann.dialogue is not None:
                parts.append(f'{ann.dialogue.speaker}: "{ann.dialogue.text}"')
            if ann.speech_act:
                parts.append(f"({ann.speech_act})")
            if ann.visual:
                parts.append(ann.visual)
            if ann.affect is not None:
                parts.append(f"[{ann.affect.label} {ann.affect.intensity:.2f}]")
            marker = " *cut*" if ann.boundary else ""
            lines.append(f"  {format_ms(ann.at_ms)}{marker} {' | '.join(parts)}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "annotations": [a.to_json() for a in self.annotations],
            "range": self.range.to_json(),
            "scene_id": self.scene_id,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneTrace":
        return cls(
            scene_id=obj["scene_id"],
            range=TimeRange.from_json(obj["range"]),
            annotations=tuple(SemanticAnnotation.from_json(a) for a in obj["annotations"]),
        )


@dataclass(frozen=True)
class CharacterNode:
    name: str
    aliases: tuple[str, ...] = ()
    description: str = ""

    def to_json(self) -> dict:
        return {"aliases": list(self.aliases), "description": self.description, "name": self.name}


@dataclass(frozen=True)
class CharacterEdge:
    source: str
    target: str
    relationship: str
    evidence: tuple[TimeRange, ...] = ()

    def to_json(self) -> dict:
        return {
            "evidence": [r.to_json() for r in self.evidence],
            "from": self.source,
            "relationship": self.relationship,
            "to": self.target,
        }


@dataclass(frozen=True)
class CharacterGraph:
    """Character relationship graph, the textual adjacency map of the index."""

    nodes: tuple[CharacterNode, ...]
    edges: tuple[CharacterEdge, ...]

    def known_names(self) -> dict[str, str]:
        """Case-folded name/alias -> canonical node name."""
        names: dict[str, str] = {}
        for node in self.nodes:
            names[node.name.casefold()] = node.name
            for alias in node.aliases:
                names.setdefault(alias.casefold(), node.name)
        return names

    def resolve(self, name: str) -> Optional[str]:
        return self.known_names().get(name.casefold())

    def to_adjacency_text(self) -> str:
        """Readable adjacency map used inside prompts."""
        lines = []
        for node in self.nodes:
            alias = f" (aka {', '.join(node.aliases)})" if node.aliases else ""
            desc = f": {node.description}" if node.description else ""
            lines.append(f"- {node.name}{alias}{desc}")
        for edge in self.edges:
            lines.append(f"- {edge.source} -> {edge.target}: {edge.relationship}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"edges": [e.to_json() for e in self.edges], "nodes": [n.to_json() for n in self.nodes]}

    @classmethod
    def from_json(cls, obj: dict) -> "CharacterGraph":
        nodes = tuple(
            CharacterNode(n["name"], tuple(n.get("aliases", ())), n.get("description", ""))
            for n in obj["nodes"]
        )
        edges = tuple(
            CharacterEdge(
                e["from"],
                e["to"],
                e["relationship"],
                tuple(TimeRange.from_json(r) for r in e.get("evidence", ())),
            )
            for e in obj["edges"]
        )
        return cls(nodes, edges)


@dataclass(frozen=True)
class PlotPoint:
    text: str
    range: Optional[TimeRange] = None

    def to_json(self) -> dict:
        return {"range": self.range.to_json() if self.range else None, "text": self.text}


@dataclass(frozen=True)
class GlobalSynopsis:
    """Global narrative scaffold: format, setting, premise, ordered plot points."""

    media_format: str
    setting: str
    premise: str
    plot_points: tuple[PlotPoint, ...]

    def to_json(self) -> dict:
        return {
            "media_format": self.media_format,
            "plot_points": [p.to_json() for p in self.plot_points],
            "premise": self.premise,
            "setting": self.setting,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GlobalSynopsis":
        points = tuple(
            PlotPoint(p["text"], TimeRange.from_json(p["range"]) if p.get("range") else None)
            for p in obj["plot_points"]
        )
        return cls(obj["media_format"], obj["setting"], obj["premise"], points)


@dataclass(frozen=True)
class NarrativeIndex:
    """The persistent comprehension artifact the whole system queries."""

    project_id: str
    synopsis: GlobalSynopsis
    characters: CharacterGraph
    scenes: tuple[SceneTrace, ...]
    meta: dict

    def duration_ms(self) -> int:
        return int(self.meta["duration_ms"])

    def primary_asset_id(self) -> str:
        return self.meta["asset_id"]

    def asset_duration_ms(self, asset_id: str) -> Optional[int]:
        value = self.meta.get("assets", {}).get(asset_id)
        return int(value) if value is not None else None

    def annotation_timestamps_ms(self) -> list[int]:
        return [a.at_ms for scene in self.scenes for a in scene.annotations]

    def to_json(self) -> dict:
        return {
            "characters": self.characters.to_json(),
            "kind": "narrative_index",
            "meta": self.meta,
            "project_id": self.project_id,
            "scenes": [s.to_json() for s in self.scenes],
            "schema_version": SCHEMA_VERSION,
            "synopsis": self.synopsis.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NarrativeIndex":
        return cls(
            project_id=obj["project_id"],
            synopsis=GlobalSynopsis.from_json(obj["synopsis"]),
            characters=CharacterGraph.from_json(obj["characters"]),
            scenes=tuple(SceneTrace.from_json(s) for s in obj["scenes"]),
            meta=obj["meta"],
        )


class RenderingMode(str, Enum):
    """Per-clip audio treatment in the final render."""

    NARRATED_OVERLAY = "narrated_overlay"
    RAW_AUDIO = "raw_audio"
    UNTRIMMED = "untrimmed"


@dataclass(frozen=True)
class ClipSelection:
    """One retrieved source span placed on the output timeline."""

    asset_id: str
    source: TimeRange
    output_position: int
    justification: str
    narrative_function: str
    rendering_mode: RenderingMode = RenderingMode.NARRATED_OVERLAY
    narration_id: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "justification": self.justification,
            "narration_id": self.narration_id,
            "narrative_function": self.narrative_function,
            "output_position": self.output_position,
            "rendering_mode": self.rendering_mode.value,
            "source": self.source.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClipSelection":
        return cls(
            asset_id=obj["asset_id"],
            source=TimeRange.from_json(obj["source"]),
            output_position=obj["output_position"],
            justification=obj["justification"],
            narrative_function=obj["narrative_function"],
            rendering_mode=RenderingMode(obj["rendering_mode"]),
            narration_id=obj.get("narration_id"),
        )


@dataclass(frozen=True)
class NarrationSegment:
    """Voiceover script unit bound to one storyboard section."""

    narration_id: str
    text: str
    storyboard_section_id: str
    audio_uri: Optional[str] = None
    est_duration_ms: int = 0

    def to_json(self) -> dict:
        return {
            "audio_uri": self.audio_uri,
            "est_duration_ms": self.est_duration_ms,
            "narration_id": self.narration_id,
            "storyboard_section_id": self.storyboard_section_id,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NarrationSegment":
        return cls(
            narration_id=obj["narration_id"],
            text=obj["text"],
            storyboard_section_id=obj["storyboard_section_id"],
            audio_uri=obj.get("audio_uri"),
            est_duration_ms=obj.get("est_duration_ms", 0),
        )


@dataclass(frozen=True)
class MusicRef:
    track_id: str
    uri: str

    def to_json(self) -> dict:
        return {"track_id": self.track_id, "uri": self.uri}


@dataclass(frozen=True)
class EditPlan:
    """Serialized editing decision document: the planning/rendering contract."""

    plan_id: str
    project_id: str
    prompt: str
    storyboard_ref: str
    entries: tuple[ClipSelection, ...]
    narration: tuple[NarrationSegment, ...]
    music: Optional[MusicRef]
    meta: dict

    def narration_by_id(self) -> dict[str, NarrationSegment]:
        return {n.narration_id: n for n in self.narration}

    def total_clip_duration_ms(self) -> int:
        return sum(e.source.duration_ms for e in self.entries)

    def with_entries(self, entries: tuple[ClipSelection, ...]) -> "EditPlan":
        return replace(self, entries=entries)

    def to_json(self) -> dict:
        return {
            "entries": [e.to_json() for e in self.entries],
            "kind": "edit_plan",
            "meta": self.meta,
            "music": self.music.to_json() if self.music else None,
            "narration": [n.to_json() for n in self.narration],
            "plan_id": self.plan_id,
            "project_id": self.project_id,
            "prompt": self.prompt,
            "schema_version": SCHEMA_VERSION,
            "storyboard_ref": self.storyboard_ref,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EditPlan":
        music = obj.get("music")
        return cls(
            plan_id=obj["plan_id"],
            project_id=obj["project_id"],
            prompt=obj["prompt"],
            storyboard_ref=obj["storyboard_ref"],
            entries=tuple(ClipSelection.from_json(e) for e in obj["entries"]),
            narration=tuple(NarrationSegment.from_json(n) for n in obj["narration"]),
            music=MusicRef(music["track_id"], music["uri"]) if music else None,
            meta=obj["meta"],
        )


@dataclass(frozen=True)
class StoryboardSection:
    """One thematic or chronological unit of the editing storyboard."""

    section_id: str
    intent: str
    tone: str
    target_duration_ms: int
    mode: str = "chronological"  # or "thematic"

    def to_json(self) -> dict:
        return {
            "intent": self.intent,
            "mode": self.mode,
            "section_id": self.section_id,
            "target_duration_ms": self.target_duration_ms,
            "tone": self.tone,
        }


@dataclass(frozen=True)
class Storyboard:
    sections: tuple[StoryboardSection, ...]

    def to_json(self) -> dict:
        return {
            "kind": "storyboard",
            "schema_version": SCHEMA_VERSION,
            "sections": [s.to_json() for s in self.sections],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Storyboard":
        return cls(
            tuple(
                StoryboardSection(
                    s["section_id"], s["intent"], s["tone"], s["target_duration_ms"], s["mode"]
                )
                for s in obj["sections"]
            )
        )


@dataclass(frozen=True)
class SubtitleCue:
    """Output-timeline caption, at most 2 lines of 42 characters."""

    range: TimeRange
    text: str

    def to_json(self) -> dict:
        return {"range": self.range.to_json(), "text": self.text}


@dataclass(frozen=True)
class BeatGrid:
    """Strictly increasing beat timestamps on the output timeline."""

    track_ref: str
    beats_ms: tuple[int, ...]

    def __post_init__(self):
        for a, b in zip(self.beats_ms, self.beats_ms[1:]):
            if b <= a:
                raise ValueError("beat timestamps must be strictly increasing")


def build_meta(
    *,
    config,
    assets: dict[str, int],
    primary_asset_id: str,
    duration_ms: int,
    model: dict,
    refinement_enabled: bool,
    created_at: str,
    warnings: list[str] | None = None,
    extra: dict | None = None,
) -> dict:
    """Provenance block shared by index and plan artifacts."""
    meta = {
        "asset_id": primary_asset_id,
        "assets": dict(assets),
        "config": config.to_json(),
        "content_hash": None,
        "created_at": created_at,
        "duration_ms": duration_ms,
        "model": model,
        "refinement_enabled": refinement_enabled,
        "warnings": sorted(warnings or []),
    }
    if extra:
        meta.update(extra)
    return meta


# Wall-clock fields never participate in logical identity.
HASH_EXEMPT_META_FIELDS = ("content_hash", "created_at")


def attach_content_hash(doc: dict) -> dict:
    """Return a copy of an artifact dict with meta.content_hash filled in.

    The hash covers the canonical serialization with wall-clock meta fields
    nulled, so logically identical runs produce identical hashes.
    """
    import copy

    doc = copy.deepcopy(doc)
    meta = doc.setdefault("meta", {})
    for fld in HASH_EXEMPT_META_FIELDS:
        meta[fld] = None
    digest = content_hash(canonical_dumps(doc))
    meta["content_hash"] = digest
    return doc


def logical_hash(doc: dict) -> str:
    """Content hash a parsed artifact ignoring wall-clock meta fields."""
    return attach_content_hash(doc)["meta"]["content_hash"]


def strip_wallclock(doc: Any) -> Any:
    """Copy of a parsed artifact with wall-clock meta fields nulled (for diffs)."""
    import copy

    doc = copy.deepcopy(doc)
    if isinstance(doc, dict) and isinstance(doc.get("meta"), dict):
        for fld in ("created_at",):
            doc["meta"].pop(fld, None)
    return doc


def finalize_artifact(doc: dict, created_at: str) -> dict:
    """Stamp creation time, then attach the logical content hash."""
    doc = attach_content_hash(doc)
    doc["meta"]["created_at"] = created_at
    return doc
