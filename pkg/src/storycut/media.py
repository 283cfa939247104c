"""Media toolkit: probing, two-granularity segmentation, segment extraction.

Real media goes through a subprocess engine built from a declared command
template; the NullEngine keeps the pipeline hermetic by emitting synthetic
segment descriptors (JSON sidecars that probe like media). Synthetic
descriptors double as test fixtures for arbitrarily long "footage".
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass

from .canonical import canonical_dumps, content_hash
from .config import PipelineConfig
from .errors import EmptyMedia, EngineError, MediaProbeError, PreconditionError
from .model import SCHEMA_VERSION, MediaAsset
from .timecode import TimeRange

DEFAULT_ENGINE_TEMPLATE = (
    "ffmpeg -y -hide_banner -loglevel error -ss {start} -to {end} -i {input} "
    "-vf scale=-2:{height} -r {fps} -pix_fmt yuv420p -crf {quality} {output}"
)

# segment compression knob; no externally mandated target exists
DEFAULT_SEGMENT_QUALITY = 28


@dataclass(frozen=True)
class SegmentPlan:
    """Overlapping macro comprehension windows plus a strict scene partition."""

    macro_segments: tuple[TimeRange, ...]
    scenes: tuple[TimeRange, ...]

    def to_json(self) -> dict:
        return {
            "kind": "segment_plan",
            "macro_segments": [r.to_json() for r in self.macro_segments],
            "scenes": [r.to_json() for r in self.scenes],
            "schema_version": SCHEMA_VERSION,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SegmentPlan":
        return cls(
            macro_segments=tuple(TimeRange.from_json(r) for r in obj["macro_segments"]),
            scenes=tuple(TimeRange.from_json(r) for r in obj["scenes"]),
        )


@dataclass(frozen=True)
class SegmentArtifact:
    """A downsampled media slice ready for model consumption."""

    uri: str
    range: TimeRange
    height: int
    fps: int

    def to_json(self) -> dict:
        return {"fps": self.fps, "height": self.height, "range": self.range.to_json(), "uri": self.uri}

    @classmethod
    def from_json(cls, obj: dict) -> "SegmentArtifact":
        return cls(obj["uri"], TimeRange.from_json(obj["range"]), obj["height"], obj["fps"])


def plan_segments(duration_ms: int, config: PipelineConfig) -> SegmentPlan:
    """Compute macro windows (stride = window - overlap) and scene tiling.

    Macro segments start at multiples of the stride and are clipped to the
    media end, so every interior boundary is covered by exactly one overlap
    of macro_overlap; the final segment may be shorter than a full window.
    Scenes tile [0, duration] without overlap.
    """
    if duration_ms <= 0:
        raise EmptyMedia(f"duration must be positive, got {duration_ms} ms")
    window = config.macro_window_ms
    stride = window - config.macro_overlap_ms
    macro: list[TimeRange] = []
    start = 0
    while True:
        end = min(start + window, duration_ms)
        macro.append(TimeRange(start, end))
        if end >= duration_ms:
            break
        start += stride

    scene_window = config.scene_window_ms
    scenes: list[TimeRange] = []
    start = 0
    while start < duration_ms:
        end = min(start + scene_window, duration_ms)
        scenes.append(TimeRange(start, end))
        start = end
    return SegmentPlan(tuple(macro), tuple(scenes))


# --- probing -----------------------------------------------------------------


def _probe_synthetic(data: bytes, uri: str) -> MediaAsset | None:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if not isinstance(doc, dict) or not doc.get("synthetic_media"):
        return None
    duration_ms = doc.get("duration_ms")
    if duration_ms is None and doc.get("duration") is not None:
        duration_ms = round(float(doc["duration"]) * 1000)
    if not duration_ms or duration_ms <= 0:
        raise EmptyMedia(f"synthetic media at {uri} has zero duration")
    width = int(doc.get("width", 0))
    height = int(doc.get("height", 0))
    if width <= 0 or height <= 0:
        raise MediaProbeError(f"{uri}: video stream required (no dimensions)")
    return MediaAsset(
        asset_id=doc.get("asset_id") or content_hash(data)[:16],
        uri=uri,
        duration_ms=int(duration_ms),
        width=width,
        height=height,
        fps=float(doc.get("fps", 1)),
        has_audio=bool(doc.get("has_audio", False)),
    )


def probe(store, uri: str) -> MediaAsset:
    """Populate MediaAsset metadata from container headers.

    Synthetic descriptors (JSON with ``synthetic_media: true``) are probed
    natively; anything else goes through ffprobe.
    """
    data = store.backend.get(uri)
    synthetic = _probe_synthetic(data, uri)
    if synthetic is not None:
        return synthetic
    local = store.local_path(uri)
    argv = [
        "ffprobe",
        "-v",
        "error",
        "-print_format",
        "json",
        "-show_format",
        "-show_streams",
        str(local),
    ]
    try:
        result = subprocess.run(argv, capture_output=True, text=True, timeout=120)
    except FileNotFoundError as exc:
        raise MediaProbeError("ffprobe is not installed; cannot probe real media") from exc
    if result.returncode != 0:
        raise MediaProbeError(f"unreadable container {uri}: {result.stderr.strip()}")
    try:
        info = json.loads(result.stdout)
    except json.JSONDecodeError as exc:
        raise MediaProbeError(f"ffprobe produced unparseable output for {uri}") from exc

    video = None
    has_audio = False
    for stream in info.get("streams", []):
        if stream.get("codec_type") == "video" and video is None:
            video = stream
        if stream.get("codec_type") == "audio":
            has_audio = True
    if video is None:
        raise MediaProbeError(f"{uri}: video stream required")
    duration = float(info.get("format", {}).get("duration") or video.get("duration") or 0)
    if duration <= 0:
        raise EmptyMedia(f"{uri}: zero-duration stream")
    rate = video.get("r_frame_rate", "0/1")
    try:
        num, den = rate.split("/")
        fps = float(num) / float(den) if float(den) else 0.0
    except ValueError:
        fps = 0.0
    return MediaAsset(
        asset_id=content_hash(data)[:16],
        uri=uri,
        duration_ms=round(duration * 1000),
        width=int(video.get("width", 0)),
        height=int(video.get("height", 0)),
        fps=fps,
        has_audio=has_audio,
    )


# --- engines -------------------------------------------------------------------


class NullEngine:
    """Manifest-only engine: no codecs, no media; keeps CI hermetic."""

    kind = "null"


class SubprocessEngine:
    """Media engine reached through a subprocess command template.

    Template placeholders: {input} {start} {end} {height} {fps} {output},
    plus an optional {quality} compression knob. Exit code 0 means success;
    stderr is captured verbatim into EngineError.
    """

    kind = "subprocess"

    def __init__(self, template: str = DEFAULT_ENGINE_TEMPLATE, quality: int = DEFAULT_SEGMENT_QUALITY):
        self.template = template
        self.quality = quality

    def run(self, argv: list[str]):
        try:
            result = subprocess.run(argv, capture_output=True, text=True, timeout=600)
        except FileNotFoundError as exc:
            raise EngineError(f"engine binary missing: {argv[0]}") from exc
        if result.returncode != 0:
            raise EngineError(f"engine failed (exit {result.returncode}): {' '.join(argv[:3])}", result.stderr)

    def extract(self, input_path: str, start_s: float, end_s: float, height: int, fps: int, output_path: str):
        command = self.template.format(
            input=shlex.quote(input_path),
            start=f"{start_s:.3f}",
            end=f"{end_s:.3f}",
            height=height,
            fps=fps,
            quality=self.quality,
            output=shlex.quote(output_path),
        )
        self.run(shlex.split(command))


def extract_segment(
    store,
    project_id: str,
    asset: MediaAsset,
    rng: TimeRange,
    config: PipelineConfig,
    engine,
) -> SegmentArtifact:
    """Produce the downsampled artifact for one segment window.

    Deterministic output paths make re-extraction idempotent; source media is
    never touched.
    """
    if rng.end_ms > asset.duration_ms:
        raise PreconditionError(
            f"segment {rng} exceeds asset duration {asset.duration_ms} ms"
        )
    height, fps = config.target_height, config.target_fps
    stem = f"segment-{rng.start_ms:09d}-{rng.end_ms:09d}-{height}p{fps}"
    if isinstance(engine, NullEngine) or getattr(engine, "kind", "") == "null":
        descriptor = {
            "asset_id": asset.asset_id,
            "duration_ms": rng.duration_ms,
            "fps": fps,
            "has_audio": asset.has_audio,
            "height": height,
            "kind": "segment",
            "range": rng.to_json(),
            "source": asset.uri,
            "synthetic_media": True,
            "width": round(asset.width * height / asset.height) if asset.height else height,
        }
        uri = f"{project_id}/segments/{stem}.json"
        store.backend.put(uri, canonical_dumps(descriptor))
        return SegmentArtifact(uri=uri, range=rng, height=height, fps=fps)

    uri = f"{project_id}/segments/{stem}.mp4"
    input_path = str(store.local_path(asset.uri))
    output_path = str(store.local_path(uri))
    store.local_path(f"{project_id}/segments/.keep").parent.mkdir(parents=True, exist_ok=True)
    engine.extract(input_path, rng.start_seconds, rng.end_seconds, height, fps, output_path)
    return SegmentArtifact(uri=uri, range=rng, height=height, fps=fps)
