from __future__ import annotations

import json
import random
import re

import pytest

from storycut.config import PipelineConfig
from storycut.errors import BudgetError, PreconditionError
from storycut.gateway import ModelGateway, ScriptedProvider, estimate_tokens
from storycut.model import NarrativeIndex
from storycut.qa import (
    CITATION_TOLERANCE_MS,
    answer,
    format_index_prompt,
    needs_visual_evidence,
    retrieve_clips,
)
from storycut.timecode import TimeRange

CONFIG = PipelineConfig()


class TestFormatIndexPrompt:
    def test_large_budget_keeps_full_traces(self, fixture_index):
        text = format_index_prompt(fixture_index, 1_000_000)
        for scene in fixture_index.scenes:
            assert scene.scene_id in text
            assert "(elided" not in text

    def test_tight_budget_stubs_every_scene(self, fixture_index):
        full = estimate_tokens(format_index_prompt(fixture_index, 1_000_000))
        budget = full // 2
        text = format_index_prompt(fixture_index, budget)
        assert estimate_tokens(text) <= budget
        for scene in fixture_index.scenes:
            assert scene.scene_id in text  # stub or full, never dropped
        assert "(elided" in text

    def test_newest_scenes_upgraded_first(self, fixture_index):
        full = estimate_tokens(format_index_prompt(fixture_index, 1_000_000))
        text = format_index_prompt(fixture_index, full - full // 6)
        stubbed = [s.scene_id for s in fixture_index.scenes if f"Scene {s.scene_id} [" in text and s.scene_id in re.findall(r"Scene (scene-\d+) \[[^\]]+\]: \(elided", text)]
        if stubbed:
            # elision eats the oldest scenes first
            first_full = [s.scene_id for s in fixture_index.scenes if s.scene_id not in stubbed]
            assert stubbed == [s.scene_id for s in fixture_index.scenes[: len(stubbed)]]
            assert first_full

    def test_budget_smaller_than_head_raises(self, fixture_index):
        with pytest.raises(BudgetError):
            format_index_prompt(fixture_index, 10)


class TestRouting:
    def test_textual_question_routes_false(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        assert needs_visual_evidence("What were the consequences of that decision?", fixture_index, gw) is False

    def test_visual_question_routes_true(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        assert needs_visual_evidence(
            "Show me the moment the captain expresses doubt", fixture_index, gw
        ) is True

    def test_gateway_failure_degrades_to_false_with_warning(self, fixture_index):
        gw = ModelGateway(ScriptedProvider(), CONFIG)  # no scripts -> ProviderError
        assert needs_visual_evidence("anything", fixture_index, gw) is False
        assert any("routing unavailable" in w for w in gw.warnings)

    def test_decision_journaled_with_rationale(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        needs_visual_evidence("Show me the ridge", fixture_index, gw)
        decisions = [e for e in gw.journal if e.get("kind") == "qa_route_decision"]
        assert decisions and decisions[0]["rationale"]


class TestAnswer:
    def test_citations_exist_in_index(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        response = answer(fixture_index, "When does the crew talk about the beacon?", gw, CONFIG)
        valid = set(fixture_index.annotation_timestamps_ms())
        for scene in fixture_index.scenes:
            valid.add(scene.range.start_ms)
            valid.add(scene.range.end_ms)
        assert response.cited_timestamps_ms
        for ts in response.cited_timestamps_ms:
            assert any(abs(ts - known) <= CITATION_TOLERANCE_MS for known in valid)
        assert response.grounded

    def test_unanswerable_question_admits_gap(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        response = answer(fixture_index, "Explain the quantum flux regulator subplot", gw, CONFIG)
        assert response.grounded is False
        assert response.cited_timestamps_ms == []

    def test_empty_question_rejected(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        with pytest.raises(PreconditionError):
            answer(fixture_index, "   ", gw, CONFIG)

    def test_invalid_citation_dropped_and_ungrounded(self, fixture_index):
        payload = json.dumps(
            {"answer": "made up", "cited_timestamps": [999_999.0], "grounded": True}
        )
        provider = ScriptedProvider(
            responses={"qa_answer": [payload]},
            handlers={"qa_route": lambda p, a: json.dumps({"needs_visual": False, "rationale": "n"})},
        )
        gw = ModelGateway(provider, CONFIG)
        response = answer(fixture_index, "who said what", gw, CONFIG)
        assert response.cited_timestamps_ms == []
        assert response.grounded is False
        assert response.warnings

    def test_visual_question_attaches_evidence(self, fixture_index, world):
        gw = ModelGateway(world.provider(), CONFIG)
        response = answer(fixture_index, "Show the moment they cross the ridge", gw, CONFIG)
        assert response.evidence_clips
        for clip in response.evidence_clips:
            assert clip.asset_id == fixture_index.primary_asset_id()


def brute_force_retrieval(index: NarrativeIndex, query: str, window=None):
    """Independent oracle: score every annotation, sort, build neighborhoods."""
    tokens = set(re.findall(r"[a-z0-9']+", query.casefold()))
    if not tokens:
        return []
    rows = []
    for scene in index.scenes:
        anns = scene.annotations
        for j, ann in enumerate(anns):
            if window is not None and not (window.start_ms <= ann.at_ms <= window.end_ms):
                continue
            ann_tokens = set(re.findall(r"[a-z0-9']+", ann.text_content().casefold()))
            inter = len(tokens & ann_tokens)
            if not inter:
                continue
            union = len(tokens | ann_tokens)
            start = anns[j - 1].at_ms if j > 0 else scene.range.start_ms
            end = anns[j + 1].at_ms if j + 1 < len(anns) else scene.range.end_ms
            if window is not None:
                start, end = max(start, window.start_ms), min(end, window.end_ms)
            if start >= end:
                continue
            rows.append((inter, union, ann.at_ms, start, end))
    # sort by score desc (cross-multiplied exact rationals), tie by timestamp
    rows.sort(key=lambda r: r[2])
    import functools

    def cmp(a, b):
        left, right = a[0] * b[1], b[0] * a[1]
        if left != right:
            return -1 if left > right else 1
        return -1 if a[2] < b[2] else (1 if a[2] > b[2] else 0)

    rows.sort(key=functools.cmp_to_key(cmp))
    return [(r[3], r[4]) for r in rows]


class TestRetrieveClips:
    def test_exact_match_ranks_first(self, fixture_index):
        target = fixture_index.scenes[2].annotations[4]
        tokens = set(re.findall(r"[a-z0-9']+", target.text_content().casefold()))
        # word banks repeat text; the earliest annotation with this exact token
        # set is the expected winner (ties break toward earlier timestamps)
        earliest = min(
            a.at_ms
            for s in fixture_index.scenes
            for a in s.annotations
            if set(re.findall(r"[a-z0-9']+", a.text_content().casefold())) == tokens
        )
        results = retrieve_clips(fixture_index, target.text_content())
        assert results
        first = results[0]
        assert first.source.start_ms <= earliest <= first.source.end_ms

    def test_window_excluding_matches_gives_empty(self, fixture_index):
        results = retrieve_clips(fixture_index, "zzz qqq xyzzy")
        assert results == []

    def test_ties_break_toward_earlier_timestamp(self, fixture_index):
        results = retrieve_clips(fixture_index, "the beacon answers")
        positions = [c.output_position for c in results]
        assert positions == list(range(len(results)))

    def test_equal_scores_at_100s_and_400s_rank_100s_first(self):
        # hand-built index: identical annotation text at 100 s and 400 s
        from storycut.model import (
            CharacterGraph,
            GlobalSynopsis,
            NarrativeIndex,
            PlotPoint,
            SceneTrace,
            SemanticAnnotation,
        )

        def scene(sid, start_s, ats_s):
            return SceneTrace(
                scene_id=sid,
                range=TimeRange.from_seconds(start_s, start_s + 300),
                annotations=tuple(
                    SemanticAnnotation(at_ms=round(t * 1000), visual="the frozen mast stands alone")
                    for t in ats_s
                ),
            )

        index = NarrativeIndex(
            project_id="tiny",
            synopsis=GlobalSynopsis("other", "s", "p", (PlotPoint("x"),)),
            characters=CharacterGraph((), ()),
            scenes=(scene("scene-000000", 0, [50, 100, 150]), scene("scene-000300", 300, [400, 500])),
            meta={"asset_id": "a", "assets": {"a": 600_000}, "duration_ms": 600_000},
        )
        results = retrieve_clips(index, "the frozen mast stands alone")
        assert results[0].source.start_ms <= 50_000  # neighborhood of the 50 s hit
        firsts = [c.source for c in results]
        # all scores equal; ordering strictly by ascending timestamp
        anchors = [50_000, 100_000, 150_000, 400_000, 500_000]
        for clip, anchor in zip(results, anchors):
            assert clip.source.start_ms <= anchor <= clip.source.end_ms
        assert len(firsts) == 5

    def test_matches_brute_force_oracle(self, fixture_index):
        rng = random.Random(42)
        vocabulary = sorted(
            {
                w
                for scene in fixture_index.scenes
                for a in scene.annotations
                for w in re.findall(r"[a-z0-9']+", a.text_content().casefold())
            }
        )
        total = sum(len(s.annotations) for s in fixture_index.scenes)
        assert total <= 500
        for case in range(40):
            query = " ".join(rng.sample(vocabulary, rng.randint(1, 5)))
            window = None
            if case % 3 == 0:
                a = rng.randrange(0, fixture_index.duration_ms() - 60_000)
                window = TimeRange(a, a + rng.randrange(60_000, 600_000))
            expected = brute_force_retrieval(fixture_index, query, window)
            actual = [(c.source.start_ms, c.source.end_ms) for c in retrieve_clips(fixture_index, query, window)]
            assert actual == expected, f"case {case}: query={query!r} window={window}"

    def test_results_within_window(self, fixture_index):
        window = TimeRange(600_000, 900_000)
        for clip in retrieve_clips(fixture_index, "ridge beacon signal crew", window):
            assert clip.source.start_ms >= window.start_ms
            assert clip.source.end_ms <= window.end_ms
