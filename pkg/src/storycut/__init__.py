"""storycut: agentic long-form video comprehension, QA, and edit compilation.

The pipeline turns long videos into a persistent timestamped narrative
index, answers questions grounded in it, and compiles free-form editing
prompts into validated edit plans and render graphs. All stochastic
external services sit behind pluggable adapters, so runs are deterministic
and testable at desk scale.
"""

from .config import PipelineConfig
from .model import (
    BeatGrid,
    CharacterGraph,
    ClipSelection,
    EditPlan,
    GlobalSynopsis,
    MediaAsset,
    NarrationSegment,
    NarrativeIndex,
    RenderingMode,
    SceneTrace,
    SemanticAnnotation,
    Storyboard,
    SubtitleCue,
)
from .timecode import TimeRange
from .validation import ValidationReport, validate

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "BeatGrid",
    "CharacterGraph",
    "ClipSelection",
    "EditPlan",
    "GlobalSynopsis",
    "MediaAsset",
    "NarrationSegment",
    "NarrativeIndex",
    "RenderingMode",
    "SceneTrace",
    "SemanticAnnotation",
    "Storyboard",
    "SubtitleCue",
    "TimeRange",
    "ValidationReport",
    "validate",
    "__version__",
]
