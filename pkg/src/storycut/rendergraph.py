"""Render graphs: the executable composition plan.

A graph is a DAG of media operations with exactly one output node. The null
engine turns it into a manifest artifact (topological node listing); the
subprocess engine executes it into a playable file.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .canonical import canonical_dumps
from .errors import EngineError, GraphError
from .media import NullEngine, SubprocessEngine
from .model import SCHEMA_VERSION
from .timecode import format_ms

OPS = ("extract_clip", "overlay_audio", "burn_subtitle", "concat", "mix_music", "output")


@dataclass(frozen=True)
class RenderNode:
    node_id: str
    op: str
    params: dict = field(default_factory=dict)
    inputs: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"inputs": list(self.inputs), "node_id": self.node_id, "op": self.op, "params": self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "RenderNode":
        return cls(obj["node_id"], obj["op"], obj.get("params", {}), tuple(obj.get("inputs", ())))


@dataclass(frozen=True)
class RenderGraph:
    nodes: tuple[RenderNode, ...]

    def node_map(self) -> dict[str, RenderNode]:
        return {n.node_id: n for n in self.nodes}

    def check(self):
        """Raise GraphError unless the graph is a DAG with exactly one output."""
        seen = set()
        for node in self.nodes:
            if node.op not in OPS:
                raise GraphError(f"unknown node op {node.op!r}")
            if node.node_id in seen:
                raise GraphError(f"duplicate node id {node.node_id!r}")
            seen.add(node.node_id)
        by_id = self.node_map()
        for node in self.nodes:
            for upstream in node.inputs:
                if upstream not in by_id:
                    raise GraphError(f"node {node.node_id!r} references unknown input {upstream!r}")
        outputs = [n for n in self.nodes if n.op == "output"]
        if len(outputs) != 1:
            raise GraphError(f"graph must have exactly one output node, found {len(outputs)}")
        self.topological_order()

    def topological_order(self) -> list[RenderNode]:
        """Kahn's algorithm preserving declaration order; cycles raise GraphError."""
        remaining = {n.node_id: set(n.inputs) for n in self.nodes}
        ordered: list[RenderNode] = []
        done: set[str] = set()
        while remaining:
            ready = [n for n in self.nodes if n.node_id in remaining and remaining[n.node_id] <= done]
            if not ready:
                raise GraphError(f"cycle detected among nodes: {sorted(remaining)}")
            for node in ready:
                ordered.append(node)
                done.add(node.node_id)
                del remaining[node.node_id]
        return ordered

    def to_json(self) -> dict:
        return {
            "kind": "render_graph",
            "nodes": [n.to_json() for n in self.nodes],
            "schema_version": SCHEMA_VERSION,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RenderGraph":
        return cls(tuple(RenderNode.from_json(n) for n in obj["nodes"]))


@dataclass(frozen=True)
class RenderedArtifact:
    uri: str
    manifest: bool
    duration_ms: Optional[int] = None


def execute_render_graph(graph: RenderGraph, engine, store, project_id: str, stream: str = "render") -> RenderedArtifact:
    """Run the graph through an engine.

    Null engine: persists a manifest (every node in topological order) and
    produces no media. Subprocess engine: renders a playable file whose
    duration should equal the summed clip durations.
    """
    graph.check()
    ordered = graph.topological_order()
    if isinstance(engine, NullEngine) or getattr(engine, "kind", "") == "null":
        manifest = {
            "kind": "render_manifest",
            "nodes": [n.to_json() for n in ordered],
            "output": ordered[-1].node_id if ordered else None,
            "schema_version": SCHEMA_VERSION,
        }
        ref = store.put_artifact(project_id, "render_manifest", canonical_dumps(manifest), stream=stream)
        return RenderedArtifact(uri=ref.uri, manifest=True)
    return _execute_subprocess(graph, ordered, engine, store, project_id, stream)


def _write_srt(cues: list[dict], path: Path):
    lines = []
    for i, cue in enumerate(cues, 1):
        start = format_ms(cue["start_ms"]).replace(".", ",")
        end = format_ms(cue["end_ms"]).replace(".", ",")
        lines.append(f"{i}\n{start} --> {end}\n{cue['text']}\n")
    path.write_text("\n".join(lines), encoding="utf-8")


def _execute_subprocess(graph, ordered, engine: SubprocessEngine, store, project_id, stream) -> RenderedArtifact:
    produced: dict[str, Path] = {}
    with tempfile.TemporaryDirectory(prefix="storycut-render-") as tmp:
        workdir = Path(tmp)
        for node in ordered:
            out = workdir / f"{node.node_id}.mp4"
            if node.op == "extract_clip":
                src = store.local_path(node.params["asset_uri"])
                if not src.is_file():
                    raise GraphError(f"extract_clip source missing: {node.params['asset_uri']}")
                argv = ["ffmpeg", "-y", "-hide_banner", "-loglevel", "error"]
                argv += ["-ss", f"{node.params['start_ms'] / 1000:.3f}", "-to", f"{node.params['end_ms'] / 1000:.3f}"]
                argv += ["-i", str(src)]
                if node.params.get("mute"):
                    argv += ["-an"]
                else:
                    argv += ["-c:a", "aac"]
                argv += ["-c:v", "libx264", "-preset", "veryfast", "-pix_fmt", "yuv420p", str(out)]
                engine.run(argv)
            elif node.op == "overlay_audio":
                video = produced[node.inputs[0]]
                audio = store.local_path(node.params["audio_uri"])
                if not audio.is_file():
                    raise GraphError(f"overlay_audio source missing: {node.params['audio_uri']}")
                engine.run(
                    [
                        "ffmpeg", "-y", "-hide_banner", "-loglevel", "error",
                        "-i", str(video), "-i", str(audio),
                        "-map", "0:v", "-map", "1:a", "-c:v", "copy", "-c:a", "aac",
                        "-shortest", str(out),
                    ]
                )
            elif node.op == "burn_subtitle":
                video = produced[node.inputs[0]]
                srt = workdir / f"{node.node_id}.srt"
                _write_srt(node.params.get("cues", []), srt)
                engine.run(
                    [
                        "ffmpeg", "-y", "-hide_banner", "-loglevel", "error",
                        "-i", str(video), "-vf", f"subtitles={srt}",
                        "-c:a", "copy", str(out),
                    ]
                )
            elif node.op == "concat":
                listing = workdir / f"{node.node_id}.txt"
                listing.write_text(
                    "".join(f"file '{produced[up]}'\n" for up in node.inputs), encoding="utf-8"
                )
                engine.run(
                    [
                        "ffmpeg", "-y", "-hide_banner", "-loglevel", "error",
                        "-f", "concat", "-safe", "0", "-i", str(listing),
                        "-c", "copy", str(out),
                    ]
                )
            elif node.op == "mix_music":
                video = produced[node.inputs[0]]
                track = store.local_path(node.params["track_uri"])
                gain = float(node.params.get("gain", 0.2))
                engine.run(
                    [
                        "ffmpeg", "-y", "-hide_banner", "-loglevel", "error",
                        "-i", str(video), "-stream_loop", "-1", "-i", str(track),
                        "-filter_complex",
                        f"[1:a]volume={gain}[m];[0:a][m]amix=inputs=2:duration=first[a]",
                        "-map", "0:v", "-map", "[a]", "-c:v", "copy", "-c:a", "aac",
                        str(out),
                    ]
                )
            elif node.op == "output":
                video = produced[node.inputs[0]]
                uri = f"{project_id}/renders/{stream}-{node.node_id}.mp4"
                store.backend.put_file(uri, video)
                duration_ms = _probe_duration_ms(engine, video)
                return RenderedArtifact(uri=uri, manifest=False, duration_ms=duration_ms)
            produced[node.node_id] = out
    raise GraphError("graph executed without reaching its output node")


def _probe_duration_ms(engine: SubprocessEngine, path: Path) -> Optional[int]:
    import json as _json
    import subprocess as _subprocess

    try:
        result = _subprocess.run(
            ["ffprobe", "-v", "error", "-print_format", "json", "-show_format", str(path)],
            capture_output=True,
            text=True,
            timeout=120,
        )
    except FileNotFoundError as exc:
        raise EngineError("ffprobe is not installed") from exc
    if result.returncode != 0:
        return None
    try:
        duration = float(_json.loads(result.stdout)["format"]["duration"])
    except (KeyError, ValueError, TypeError):
        return None
    return round(duration * 1000)
