"""Render graph construction from a validated edit plan."""

from __future__ import annotations

from ..errors import GraphError
from ..model import EditPlan, MusicRef, RenderingMode, SubtitleCue
from ..rendergraph import RenderGraph, RenderNode

MUSIC_DUCK_GAIN = 0.2

OUTPUT_DEFAULTS = {"aspect": "16:9", "container": "mp4", "resolution": 1080}


def build_render_graph(
    plan: EditPlan,
    narration_audio: dict[str, str],
    subtitles: list[SubtitleCue],
    music: MusicRef | None,
    *,
    asset_uris: dict[str, str],
) -> RenderGraph:
    """Compose extraction, overlay, subtitle, music, and concat nodes.

    Narrated-overlay clips extract muted and gain an audio overlay; raw-audio
    and untrimmed clips extract with their own audio. Music is mixed ducked
    under narration. Missing narration audio is a GraphError.
    """
    nodes: list[RenderNode] = []
    tops: list[str] = []
    for i, entry in enumerate(plan.entries):
        extract_id = f"extract-{i:03d}"
        mute = entry.rendering_mode == RenderingMode.NARRATED_OVERLAY
        nodes.append(
            RenderNode(
                extract_id,
                "extract_clip",
                {
                    "asset_id": entry.asset_id,
                    "asset_uri": asset_uris.get(entry.asset_id, ""),
                    "end_ms": entry.source.end_ms,
                    "mute": mute,
                    "start_ms": entry.source.start_ms,
                },
            )
        )
        top = extract_id
        if entry.rendering_mode == RenderingMode.NARRATED_OVERLAY:
            audio_uri = narration_audio.get(entry.narration_id or "")
            if not audio_uri:
                raise GraphError(
                    f"entry {entry.output_position} is narrated_overlay but narration "
                    f"{entry.narration_id!r} has no audio"
                )
            overlay_id = f"overlay-{i:03d}"
            nodes.append(RenderNode(overlay_id, "overlay_audio", {"audio_uri": audio_uri}, (extract_id,)))
            top = overlay_id
        tops.append(top)

    nodes.append(RenderNode("concat", "concat", {}, tuple(tops)))
    top = "concat"
    if subtitles:
        cues = [{"end_ms": c.range.end_ms, "start_ms": c.range.start_ms, "text": c.text} for c in subtitles]
        nodes.append(RenderNode("subtitles", "burn_subtitle", {"cues": cues}, (top,)))
        top = "subtitles"
    if music is not None:
        nodes.append(
            RenderNode(
                "music",
                "mix_music",
                {"gain": MUSIC_DUCK_GAIN, "track_id": music.track_id, "track_uri": music.uri},
                (top,),
            )
        )
        top = "music"
    nodes.append(RenderNode("out", "output", dict(OUTPUT_DEFAULTS), (top,)))
    graph = RenderGraph(tuple(nodes))
    graph.check()
    return graph
