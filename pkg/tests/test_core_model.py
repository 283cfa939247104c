from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from storycut.canonical import canonical_dumps, canonical_loads
from storycut.config import PipelineConfig
from storycut.errors import ConfigError, ParseError
from storycut.model import (
    Affect,
    Dialogue,
    SceneTrace,
    SemanticAnnotation,
    attach_content_hash,
    logical_hash,
)
from storycut.timecode import TimeRange, format_ms, parse_ms
from storycut.validation import validate


class TestTimecode:
    def test_format_round_trip(self):
        assert format_ms(0) == "00:00:00.000"
        assert format_ms(3_723_456) == "01:02:03.456"
        assert parse_ms("01:02:03.456") == 3_723_456

    def test_hours_widen(self):
        assert format_ms(100 * 3600 * 1000) == "100:00:00.000"
        assert parse_ms("100:00:00.000") == 100 * 3600 * 1000

    @given(st.integers(min_value=0, max_value=10**10))
    def test_parse_inverts_format(self, ms):
        assert parse_ms(format_ms(ms)) == ms

    def test_bad_timestamps_rejected(self):
        for bad in ("1:2:3.4", "00:61:00.000", "00:00:00", "nonsense"):
            with pytest.raises(ValueError):
                parse_ms(bad)

    def test_range_invariant(self):
        with pytest.raises(ValueError):
            TimeRange(1000, 1000)
        with pytest.raises(ValueError):
            TimeRange(-1, 5)
        rng = TimeRange.from_seconds(1.0, 2.5)
        assert rng.duration_ms == 1500
        assert TimeRange.from_json(rng.to_json()) == rng


class TestCanonical:
    def test_round_trip_is_byte_identical(self):
        doc = {"b": [1, 2.5, None, True], "a": {"nested": "ünïcode"}}
        data = canonical_dumps(doc)
        assert canonical_dumps(canonical_loads(data)) == data
        assert data.endswith(b"\n")

    @given(
        st.recursive(
            st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False, allow_infinity=False) | st.text(),
            lambda children: st.lists(children) | st.dictionaries(st.text(), children),
            max_leaves=20,
        )
    )
    def test_round_trip_property(self, doc):
        data = canonical_dumps(doc)
        assert canonical_dumps(canonical_loads(data)) == data

    def test_parse_error_carries_byte_offset(self):
        with pytest.raises(ParseError) as exc:
            canonical_loads(b'{"a": }')
        assert exc.value.offset == 6

    def test_parse_error_offset_is_bytes_not_chars(self):
        # two-byte UTF-8 char before the error position
        with pytest.raises(ParseError) as exc:
            canonical_loads('{"é": }'.encode("utf-8"))
        assert exc.value.offset == len('{"é": '.encode("utf-8"))


class TestConfig:
    def test_defaults_match_production_setup(self):
        config = PipelineConfig()
        assert config.macro_window == 900.0
        assert config.macro_overlap == 60.0
        assert config.scene_window == 300.0
        assert (config.target_height, config.target_fps) == (480, 1)
        assert config.annotation_interval == 20.0
        assert config.scratchpad_budget == 4000
        assert (config.repair_attempts, config.retry_limit) == (2, 3)
        assert config.beat_snap_window == 0.5
        assert config.microcut_pad == 0.15
        assert config.refinement_enabled is True

    def test_invariants_enforced(self):
        with pytest.raises(ConfigError):
            PipelineConfig(macro_overlap=900.0)
        with pytest.raises(ConfigError):
            PipelineConfig(scene_window=901.0)
        with pytest.raises(ConfigError):
            PipelineConfig(annotation_interval=300.0)
        with pytest.raises(ConfigError):
            PipelineConfig(retry_limit=0)
        with pytest.raises(ConfigError):
            PipelineConfig(macro_window=-5)

    def test_json_round_trip(self):
        config = PipelineConfig(refinement_enabled=False, scratchpad_budget=2000)
        assert PipelineConfig.from_json(config.to_json()) == config


class TestAnnotations:
    def test_content_required(self):
        with pytest.raises(ValueError):
            SemanticAnnotation(at_ms=1000)

    def test_intensity_bounds(self):
        with pytest.raises(ValueError):
            Affect("tense", 1.2)
        assert Affect("tense", 0.70000004).intensity == 0.7

    def test_trace_round_trip(self):
        trace = SceneTrace(
            scene_id="scene-000000",
            range=TimeRange(0, 300_000),
            annotations=(
                SemanticAnnotation(at_ms=20_000, dialogue=Dialogue("Mara Voss", "hold course")),
                SemanticAnnotation(at_ms=40_000, visual="wide shot", affect=Affect("tense", 0.5)),
            ),
        )
        assert SceneTrace.from_json(trace.to_json()) == trace


class TestContentHash:
    def test_hash_ignores_wall_clock(self):
        doc = {"kind": "edit_plan", "meta": {"created_at": "2026-01-01T00:00:00Z"}, "x": 1}
        other = {"kind": "edit_plan", "meta": {"created_at": "2030-09-09T09:09:09Z"}, "x": 1}
        assert logical_hash(doc) == logical_hash(other)
        assert logical_hash(doc) != logical_hash({**doc, "x": 2})

    def test_attach_sets_hash_field(self):
        doc = attach_content_hash({"kind": "edit_plan", "meta": {}})
        assert doc["meta"]["content_hash"]


def _fixture_index_doc() -> dict:
    return {
        "kind": "narrative_index",
        "schema_version": 1,
        "project_id": "demo",
        "synopsis": {
            "media_format": "cinematic",
            "setting": "ice shelf",
            "premise": "an expedition",
            "plot_points": [{"range": None, "text": "signal found"}],
        },
        "characters": {
            "nodes": [{"aliases": [], "description": "captain", "name": "Mara Voss"}],
            "edges": [],
        },
        "scenes": [
            {
                "scene_id": "scene-000000",
                "range": {"start": "00:00:00.000", "end": "00:05:00.000"},
                "annotations": [
                    {
                        "affect": None,
                        "at": "00:00:20.000",
                        "boundary": False,
                        "dialogue": {"speaker": "Mara Voss", "text": "hold course"},
                        "speech_act": None,
                        "visual": "wide shot",
                    }
                ],
            },
            {
                "scene_id": "scene-000300",
                "range": {"start": "00:05:00.000", "end": "00:10:00.000"},
                "annotations": [
                    {
                        "affect": None,
                        "at": "00:06:00.000",
                        "boundary": False,
                        "dialogue": None,
                        "speech_act": None,
                        "visual": "crevasse field",
                    }
                ],
            },
        ],
        "meta": {
            "asset_id": "abc",
            "assets": {"abc": 600_000},
            "config": {"annotation_interval": 60.0},
            "duration_ms": 600_000,
            "refinement_enabled": True,
        },
    }


class TestValidate:
    def test_well_formed_index_is_clean(self):
        report = validate(_fixture_index_doc())
        assert report.ok, report.summary()

    def test_scene_coverage_gap_detected(self):
        doc = _fixture_index_doc()
        doc["scenes"][1]["range"]["start"] = "00:05:05.000"  # 5 s gap
        report = validate(doc)
        assert not report.ok
        assert any("coverage gap > 1 s" in v.message for v in report.violations)

    def test_overlay_clip_without_narration_flagged(self):
        doc = {
            "kind": "edit_plan",
            "plan_id": "p",
            "prompt": "x",
            "narration": [],
            "entries": [
                {
                    "asset_id": "abc",
                    "justification": "j",
                    "narration_id": None,
                    "narrative_function": "exposition",
                    "output_position": 0,
                    "rendering_mode": "narrated_overlay",
                    "source": {"start": "00:00:00.000", "end": "00:00:10.000"},
                }
            ],
            "meta": {"assets": {"abc": 600000}},
        }
        report = validate(doc)
        assert any("narration binding" in v.message for v in report.violations)

    def test_unknown_speaker_flagged(self):
        doc = _fixture_index_doc()
        doc["scenes"][0]["annotations"][0]["dialogue"]["speaker"] = "Nobody"
        report = validate(doc)
        assert any("no character node" in v.message for v in report.violations)

    def test_unattributed_speaker_allowed(self):
        doc = _fixture_index_doc()
        doc["scenes"][0]["annotations"][0]["dialogue"]["speaker"] = "unattributed"
        assert validate(doc).ok

    def test_validate_is_total_on_garbage(self):
        assert validate({"kind": "narrative_index"}).violations
        assert validate({"kind": "edit_plan", "entries": [{"output_position": "x"}]}).violations
        assert validate(json.dumps({"kind": "narrative_index"}).encode()).violations
        assert validate({"kind": "unknown_thing"}).ok

    @given(
        st.sampled_from(["narrative_index", "edit_plan", "workflow_record"]),
        st.recursive(
            st.none() | st.booleans() | st.integers() | st.text(max_size=8),
            lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(max_size=6), c, max_size=4),
            max_leaves=12,
        ),
    )
    def test_validate_never_raises_on_parseable_input(self, kind, payload):
        doc = {"kind": kind}
        if isinstance(payload, dict):
            doc.update(payload)
        else:
            doc["scenes"] = payload
            doc["entries"] = payload
            doc["activities"] = payload
        report = validate(doc)
        assert isinstance(report.ok, bool)
