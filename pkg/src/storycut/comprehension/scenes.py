"""Fine-grained scene comprehension guided by the global scaffold."""

from __future__ import annotations

from ..config import PipelineConfig
from ..errors import RangeError
from ..gateway.core import ModelGateway, PromptKind
from ..media import SegmentArtifact
from ..model import UNATTRIBUTED, Affect, Dialogue, SemanticAnnotation, SceneTrace
from ..timecode import format_ms
from .scaffold import GlobalScaffold


def scene_id_for(range_) -> str:
    return f"scene-{range_.start_ms // 1000:06d}"


def _geometry_error(annotations: list[dict], scene, config: PipelineConfig) -> str | None:
    max_gap = 3 * config.annotation_interval_ms
    prev = None
    for i, ann in enumerate(annotations):
        at = ann["at_ms"]
        if not scene.range.contains(at):
            return (
                f"annotations[{i}].at={format_ms(at)} lies outside the scene range "
                f"{scene.range}; timestamps must stay inside it"
            )
        if prev is not None:
            if at <= prev:
                return f"annotations[{i}].at={format_ms(at)} is not strictly increasing"
            if at - prev > max_gap:
                return (
                    f"gap of {(at - prev) / 1000:.1f}s before annotations[{i}] exceeds "
                    f"{max_gap / 1000:.1f}s; annotate roughly every "
                    f"{config.annotation_interval:.0f}s"
                )
        prev = at
    return None


def comprehend_scene(
    scene: SegmentArtifact,
    scaffold: GlobalScaffold,
    gateway: ModelGateway,
    config: PipelineConfig,
) -> SceneTrace:
    """Produce the timestamped semantic trace for one scene window.

    Timestamp geometry violations get one repair re-prompt, then RangeError.
    Speakers not present in the scaffold graph are stored as "unattributed"
    and surfaced as warnings on the trace.
    """
    blocks = [
        ("synopsis", _synopsis_text(scaffold)),
        ("characters", scaffold.draft_graph.to_adjacency_text()),
        ("scene", f"uri: {scene.uri}\nrange: {scene.range}"),
        ("cadence", f"annotate roughly every {config.annotation_interval:.0f} seconds"),
    ]
    request = gateway.request(PromptKind.SCENE_COMPREHEND, blocks, attachments=(scene.uri,))
    value = gateway.complete(request).value

    error = _geometry_error(value["annotations"], scene, config)
    if error is not None:
        retry = gateway.request(
            PromptKind.SCENE_COMPREHEND,
            blocks + [("error", error)],
            attachments=(scene.uri,),
        )
        value = gateway.complete(retry).value
        error = _geometry_error(value["annotations"], scene, config)
        if error is not None:
            raise RangeError(f"scene {scene.range}: {error}")

    sid = scene_id_for(scene.range)
    known = scaffold.draft_graph.known_names()
    warnings: list[str] = []
    annotations: list[SemanticAnnotation] = []
    for ann in value["annotations"]:
        dialogue = None
        if ann["dialogue"] is not None:
            speaker = ann["dialogue"]["speaker"]
            canonical = known.get(speaker.casefold()) if speaker else None
            if canonical is None:
                if speaker:
                    warnings.append(f"{sid}: speaker {speaker!r} not in character graph; unattributed")
                canonical = UNATTRIBUTED
            dialogue = Dialogue(canonical, ann["dialogue"]["text"])
        affect = Affect(ann["affect"]["label"], ann["affect"]["intensity"]) if ann["affect"] else None
        annotations.append(
            SemanticAnnotation(
                at_ms=ann["at_ms"],
                dialogue=dialogue,
                speech_act=ann["speech_act"],
                visual=ann["visual"],
                affect=affect,
                boundary=ann["boundary"],
            )
        )
    return SceneTrace(scene_id=sid, range=scene.range, annotations=tuple(annotations), warnings=tuple(warnings))


def _synopsis_text(scaffold: GlobalScaffold) -> str:
    synopsis = scaffold.draft_synopsis
    lines = [
        f"format: {synopsis.media_format}",
        f"setting: {synopsis.setting}",
        f"premise: {synopsis.premise}",
        "plot points:",
    ]
    for point in synopsis.plot_points:
        span = f" [{point.range}]" if point.range else ""
        lines.append(f"- {point.text}{span}")
    return "\n".join(lines)
