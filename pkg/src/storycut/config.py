"""Pipeline configuration.

Houses every tunable the pipeline depends on: segmentation windows,
downsampling targets, annotation cadence, scratchpad budget, repair and
retry limits, and the cut-refinement tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .timecode import ms_from_seconds


@dataclass(frozen=True)
class PipelineConfig:
    """Immutable knob set shared by every stage.

    Durations are seconds; counts are attempt budgets. Defaults follow the
    production setup: 15-minute overlapping comprehension windows, 5-minute
    scene windows, 480p/1fps segment downsampling, ~20 s annotation cadence.
    """

    macro_window: float = 900.0
    macro_overlap: float = 60.0
    scene_window: float = 300.0
    target_height: int = 480
    target_fps: int = 1
    annotation_interval: float = 20.0
    scratchpad_budget: int = 4000
    repair_attempts: int = 2
    retry_limit: int = 3
    beat_snap_window: float = 0.5
    microcut_pad: float = 0.15
    refinement_enabled: bool = True

    def __post_init__(self):
        durations = {
            "macro_window": self.macro_window,
            "macro_overlap": self.macro_overlap,
            "scene_window": self.scene_window,
            "annotation_interval": self.annotation_interval,
            "beat_snap_window": self.beat_snap_window,
            "microcut_pad": self.microcut_pad,
        }
        for name, value in durations.items():
            if value <= 0:
                raise ConfigError(f"{name} must be > 0, got {value}")
        counts = {
            "target_height": self.target_height,
            "target_fps": self.target_fps,
            "scratchpad_budget": self.scratchpad_budget,
            "repair_attempts": self.repair_attempts,
            "retry_limit": self.retry_limit,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.macro_overlap >= self.macro_window:
            raise ConfigError("macro_overlap must be smaller than macro_window")
        if self.scene_window > self.macro_window:
            raise ConfigError("scene_window must not exceed macro_window")
        if self.annotation_interval >= self.scene_window:
            raise ConfigError("annotation_interval must be smaller than scene_window")

    # Millisecond views used by all timeline arithmetic.
    @property
    def macro_window_ms(self) -> int:
        return ms_from_seconds(self.macro_window)

    @property
    def macro_overlap_ms(self) -> int:
        return ms_from_seconds(self.macro_overlap)

    @property
    def scene_window_ms(self) -> int:
        return ms_from_seconds(self.scene_window)

    @property
    def annotation_interval_ms(self) -> int:
        return ms_from_seconds(self.annotation_interval)

    @property
    def beat_snap_window_ms(self) -> int:
        return ms_from_seconds(self.beat_snap_window)

    @property
    def microcut_pad_ms(self) -> int:
        return ms_from_seconds(self.microcut_pad)

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in known})

    def replace(self, **changes) -> "PipelineConfig":
        merged = self.to_json()
        merged.update(changes)
        return PipelineConfig.from_json(merged)
