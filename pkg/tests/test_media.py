from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storycut.canonical import canonical_dumps, canonical_loads
from storycut.config import PipelineConfig
from storycut.errors import EmptyMedia, EngineError, GraphError, MediaProbeError, PreconditionError
from storycut.media import (
    NullEngine,
    SegmentPlan,
    SubprocessEngine,
    extract_segment,
    plan_segments,
    probe,
)
from storycut.rendergraph import RenderGraph, RenderNode, execute_render_graph
from storycut.store import FilesystemStore, ProjectStore
from storycut.timecode import TimeRange

CONFIG = PipelineConfig()


@pytest.fixture
def store(tmp_path) -> ProjectStore:
    s = ProjectStore(FilesystemStore(tmp_path / "store"))
    s.create_project("demo")
    return s


def put_synthetic(store, uri="demo/media/clip.json", **fields) -> str:
    doc = {
        "duration_ms": 30_000,
        "fps": 24,
        "has_audio": True,
        "height": 1080,
        "synthetic_media": True,
        "width": 1920,
    }
    doc.update(fields)
    store.backend.put(uri, canonical_dumps(doc))
    return uri


class TestPlanSegments:
    def test_single_window(self):
        plan = plan_segments(600_000, CONFIG)
        assert [(r.start_ms, r.end_ms) for r in plan.macro_segments] == [(0, 600_000)]
        assert [(r.start_ms, r.end_ms) for r in plan.scenes] == [(0, 300_000), (300_000, 600_000)]

    def test_stride_equals_window_minus_overlap(self):
        plan = plan_segments(2_400_000, CONFIG)
        assert [(r.start_ms, r.end_ms) for r in plan.macro_segments] == [
            (0, 900_000),
            (840_000, 1_740_000),
            (1_680_000, 2_400_000),
        ]

    def test_short_final_segment_accepted(self):
        plan = plan_segments(910_000, CONFIG)
        assert [(r.start_ms, r.end_ms) for r in plan.macro_segments] == [(0, 900_000), (840_000, 910_000)]

    def test_zero_duration_rejected(self):
        with pytest.raises(EmptyMedia):
            plan_segments(0, CONFIG)

    @settings(max_examples=120, deadline=None)
    @given(st.integers(min_value=1000, max_value=5 * 3600 * 1000))
    def test_coverage_and_overlap_properties(self, duration_ms):
        plan = plan_segments(duration_ms, CONFIG)
        macro = plan.macro_segments
        # union covers [0, duration]
        assert macro[0].start_ms == 0
        assert macro[-1].end_ms == duration_ms
        for prev, nxt in zip(macro, macro[1:]):
            assert nxt.start_ms < prev.end_ms  # overlap exists
            assert prev.end_ms - nxt.start_ms == CONFIG.macro_overlap_ms
        # every interior boundary is inside exactly the two adjacent segments
        for boundary in [s.end_ms for s in macro[:-1]]:
            covering = [s for s in macro if s.start_ms < boundary < s.end_ms or s.end_ms == boundary]
            assert len(covering) == 2
        # scenes tile [0, duration] exactly
        scenes = plan.scenes
        assert scenes[0].start_ms == 0
        assert scenes[-1].end_ms == duration_ms
        for prev, nxt in zip(scenes, scenes[1:]):
            assert prev.end_ms == nxt.start_ms
        assert all(s.duration_ms <= CONFIG.scene_window_ms for s in scenes)

    def test_round_trip(self):
        plan = plan_segments(910_000, CONFIG)
        assert SegmentPlan.from_json(plan.to_json()) == plan


class TestProbe:
    def test_synthetic_descriptor(self, store):
        uri = put_synthetic(store)
        asset = probe(store, uri)
        assert asset.duration_ms == 30_000
        assert (asset.width, asset.height) == (1920, 1080)
        assert asset.has_audio

    def test_text_file_is_probe_error(self, store):
        store.backend.put("demo/media/notes.txt", b"definitely not media")
        with pytest.raises(MediaProbeError):
            probe(store, "demo/media/notes.txt")

    def test_audio_only_requires_video(self, store):
        uri = put_synthetic(store, width=0, height=0, has_audio=True)
        with pytest.raises(MediaProbeError, match="video stream required"):
            probe(store, uri)

    def test_zero_duration_is_empty_media(self, store):
        uri = put_synthetic(store, duration_ms=0)
        with pytest.raises(EmptyMedia):
            probe(store, uri)


class TestExtract:
    def test_null_engine_descriptor(self, store):
        uri = put_synthetic(store, duration_ms=2_400_000)
        asset = probe(store, uri)
        artifact = extract_segment(store, "demo", asset, TimeRange(0, 900_000), CONFIG, NullEngine())
        assert artifact.height == 480 and artifact.fps == 1
        descriptor = canonical_loads(store.backend.get(artifact.uri))
        assert descriptor["duration_ms"] == 900_000
        assert descriptor["height"] == 480 and descriptor["fps"] == 1
        # the produced artifact probes like media at the target profile
        segment_asset = probe(store, artifact.uri)
        assert abs(segment_asset.duration_ms - 900_000) <= 1000

    def test_range_beyond_duration_rejected(self, store):
        uri = put_synthetic(store, duration_ms=30_000)
        asset = probe(store, uri)
        with pytest.raises(PreconditionError):
            extract_segment(store, "demo", asset, TimeRange(0, 31_000), CONFIG, NullEngine())

    def test_source_never_modified(self, store):
        uri = put_synthetic(store, duration_ms=30_000)
        before = store.backend.get(uri)
        asset = probe(store, uri)
        extract_segment(store, "demo", asset, TimeRange(0, 10_000), CONFIG, NullEngine())
        assert store.backend.get(uri) == before

    def test_missing_engine_binary_names_tool(self, store):
        uri = put_synthetic(store, duration_ms=30_000)
        asset = probe(store, uri)
        engine = SubprocessEngine("definitely-not-a-real-binary {input} {start} {end} {height} {fps} {output}")
        with pytest.raises(EngineError, match="definitely-not-a-real-binary"):
            extract_segment(store, "demo", asset, TimeRange(0, 10_000), CONFIG, engine)


def two_clip_graph() -> RenderGraph:
    return RenderGraph(
        (
            RenderNode("extract-000", "extract_clip", {"asset_uri": "a", "start_ms": 0, "end_ms": 5000, "mute": True}),
            RenderNode("extract-001", "extract_clip", {"asset_uri": "a", "start_ms": 5000, "end_ms": 9000, "mute": False}),
            RenderNode("overlay-000", "overlay_audio", {"audio_uri": "n0"}, ("extract-000",)),
            RenderNode("concat", "concat", {}, ("overlay-000", "extract-001")),
            RenderNode("out", "output", {"container": "mp4"}, ("concat",)),
        )
    )


class TestRenderGraph:
    def test_null_engine_manifest_in_topological_order(self, store):
        graph = two_clip_graph()
        rendered = execute_render_graph(graph, NullEngine(), store, "demo")
        assert rendered.manifest
        manifest = canonical_loads(store.backend.get(rendered.uri))
        ops = [n["op"] for n in manifest["nodes"]]
        assert ops == ["extract_clip", "extract_clip", "overlay_audio", "concat", "output"]
        assert manifest["output"] == "out"

    def test_cycle_detected(self):
        graph = RenderGraph(
            (
                RenderNode("a", "concat", {}, ("b",)),
                RenderNode("b", "concat", {}, ("a",)),
                RenderNode("out", "output", {}, ("a",)),
            )
        )
        with pytest.raises(GraphError, match="cycle"):
            graph.check()

    def test_exactly_one_output_required(self):
        graph = RenderGraph((RenderNode("a", "concat", {}, ()),))
        with pytest.raises(GraphError, match="output"):
            graph.check()

    def test_unknown_input_rejected(self):
        graph = RenderGraph((RenderNode("out", "output", {}, ("ghost",)),))
        with pytest.raises(GraphError, match="ghost"):
            graph.check()

    def test_round_trip(self):
        graph = two_clip_graph()
        assert RenderGraph.from_json(graph.to_json()) == graph
