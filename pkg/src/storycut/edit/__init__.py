"""Edit pipeline: storyboard, narration, retrieval, plan, transforms, render graph."""

from .adapters import (
    FixtureBeatDetector,
    FixtureTranscriber,
    MockTTS,
    MusicTrack,
    TTSResult,
    WordSpan,
    load_track_manifest,
)
from .graph import build_render_graph
from .plan import assemble_edit_plan, deterministic_plan_id
from .retrieval import assign_rendering_mode, retrieve_and_align, select_music
from .storyboard import estimate_narration_ms, plan_storyboard, write_narration
from .transforms import beat_align, dynamic_crop, generate_subtitles, micro_cut_refine, narration_spans

__all__ = [
    "FixtureBeatDetector",
    "FixtureTranscriber",
    "MockTTS",
    "MusicTrack",
    "TTSResult",
    "WordSpan",
    "load_track_manifest",
    "build_render_graph",
    "assemble_edit_plan",
    "deterministic_plan_id",
    "assign_rendering_mode",
    "retrieve_and_align",
    "select_music",
    "estimate_narration_ms",
    "plan_storyboard",
    "write_narration",
    "beat_align",
    "dynamic_crop",
    "generate_subtitles",
    "micro_cut_refine",
    "narration_spans",
]
