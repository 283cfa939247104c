"""Built-in workflow definitions: comprehend, qa, edit.

Definitions are deterministic replay scripts over the workflow context:
the comprehend pipeline runs probe -> segmentation -> sequential coarse
chain -> parallel scene fan-out -> refinement join; edit compiles a prompt
into a validated plan, transforms it, and renders.
"""

from __future__ import annotations

from dataclasses import replace

from ..canonical import content_hash
from ..comprehension import (
    GlobalScaffold,
    Scratchpad,
    bootstrap_scratchpad,
    build_global_scaffold,
    comprehend_scene,
    comprehend_segment,
    refine_index,
)
from ..edit.graph import build_render_graph
from ..edit.plan import assemble_edit_plan
from ..edit.retrieval import assign_rendering_mode, retrieve_and_align, select_music
from ..edit.storyboard import plan_storyboard, write_narration
from ..edit.transforms import beat_align, dynamic_crop, generate_subtitles, micro_cut_refine
from ..errors import NotFound, PreconditionError
from ..media import SegmentArtifact, SegmentPlan, extract_segment, plan_segments, probe
from ..model import (
    SCHEMA_VERSION,
    BeatGrid,
    ClipSelection,
    EditPlan,
    MediaAsset,
    MusicRef,
    NarrationSegment,
    NarrativeIndex,
    SceneTrace,
    Storyboard,
    SubtitleCue,
)
from ..qa import answer as qa_answer
from ..rendergraph import RenderGraph, execute_render_graph
from ..timecode import TimeRange


def _first_media_uri(store, project_id: str) -> str:
    files = store.backend.list_prefix(f"{project_id}/media")
    if not files:
        raise PreconditionError(f"project {project_id!r} has no uploaded media")
    return sorted(files)[0]


def _effective_config(runtime, params: dict):
    config = runtime.config
    if "refinement_enabled" in params:
        config = config.replace(refinement_enabled=bool(params["refinement_enabled"]))
    return config


# --- comprehend ----------------------------------------------------------------


def comprehend_workflow(ctx, params: dict) -> dict:
    rt = ctx.runtime
    store = ctx.store
    project = ctx.record.project_id
    config = _effective_config(rt, params)

    media_uri = params.get("media_uri") or _first_media_uri(store, project)
    media_hash = content_hash(store.backend.get(media_uri))

    asset_ref = ctx.activity(
        "probe",
        lambda: ctx.put("media_asset", probe(store, media_uri).to_json()),
        {"media_hash": media_hash, "uri": media_uri},
    )
    asset = MediaAsset.from_json(ctx.load(asset_ref))

    plan_ref = ctx.activity(
        "plan_segments",
        lambda: ctx.put("segment_plan", plan_segments(asset.duration_ms, config).to_json()),
        {"asset": asset_ref},
    )
    seg_plan = SegmentPlan.from_json(ctx.load(plan_ref))

    def _extract(rng: TimeRange):
        return lambda: ctx.put(
            "segment_meta",
            extract_segment(store, project, asset, rng, config, rt.media_engine).to_json(),
            stream=f"segment-meta-{rng.start_ms:09d}-{rng.end_ms:09d}",
        )

    macro_refs = ctx.parallel(
        [
            (f"extract_macro_{i:02d}", _extract(rng), {"asset": asset_ref, "end": rng.end_ms, "start": rng.start_ms})
            for i, rng in enumerate(seg_plan.macro_segments)
        ]
    )
    macro_segments = [SegmentArtifact.from_json(ctx.load(r)) for r in macro_refs]

    scratch_ref = ctx.activity(
        "bootstrap_scratchpad",
        lambda: ctx.put(
            "scratchpad",
            bootstrap_scratchpad(macro_segments[0], ctx.gateway).to_json(),
            stream="scratchpad-00",
        ),
        {"segment": macro_refs[0]},
    )

    summaries: list[tuple[TimeRange, str]] = []
    pass_refs = []
    for i, segment in enumerate(macro_segments):
        prev_ref = scratch_ref if i == 0 else pass_refs[-1]

        def _segment_pass(segment=segment, prev_ref=prev_ref, i=i):
            prev_doc = ctx.load(prev_ref)
            scratchpad = Scratchpad.from_parsed(_scratchpad_fields(prev_doc))
            summary, updated = comprehend_segment(segment, scratchpad, ctx.gateway, config)
            doc = {
                "kind": "segment_pass",
                "schema_version": SCHEMA_VERSION,
                "scratchpad": updated.to_json(),
                "summary": {"range": summary[0].to_json(), "text": summary[1]},
            }
            return ctx.put("segment_pass", doc, stream=f"segment-pass-{i:02d}")

        pass_ref = ctx.activity(
            f"comprehend_segment_{i:02d}",
            _segment_pass,
            {"scratchpad": prev_ref, "segment": macro_refs[i]},
        )
        pass_refs.append(pass_ref)
        doc = ctx.load(pass_ref)
        summaries.append((TimeRange.from_json(doc["summary"]["range"]), doc["summary"]["text"]))

    def _scaffold():
        final_doc = ctx.load(pass_refs[-1])
        scratchpad = Scratchpad.from_parsed(_scratchpad_fields(final_doc))
        scaffold = build_global_scaffold(summaries, scratchpad, ctx.gateway, config)
        return ctx.put("scaffold", scaffold.to_json())

    scaffold_ref = ctx.activity("build_scaffold", _scaffold, {"passes": pass_refs})
    scaffold = GlobalScaffold.from_json(ctx.load(scaffold_ref))

    scene_refs = ctx.parallel(
        [
            (f"extract_scene_{j:02d}", _extract(rng), {"asset": asset_ref, "end": rng.end_ms, "start": rng.start_ms})
            for j, rng in enumerate(seg_plan.scenes)
        ]
    )
    scene_segments = [SegmentArtifact.from_json(ctx.load(r)) for r in scene_refs]

    def _scene(j: int):
        def run():
            trace = comprehend_scene(scene_segments[j], scaffold, ctx.gateway, config)
            doc = {
                **trace.to_json(),
                "kind": "scene_trace",
                "schema_version": SCHEMA_VERSION,
                "warnings": list(trace.warnings),
            }
            return ctx.put("scene_trace", doc, stream=f"scene-trace-{j:02d}")

        return run

    trace_refs = ctx.parallel(
        [
            (f"comprehend_scene_{j:02d}", _scene(j), {"scaffold": scaffold_ref, "segment": scene_refs[j]})
            for j in range(len(scene_segments))
        ]
    )
    traces = []
    for ref in trace_refs:
        doc = ctx.load(ref)
        trace = SceneTrace.from_json(doc)
        traces.append(replace(trace, warnings=tuple(doc.get("warnings", ()))))

    def _refine():
        index = refine_index(
            scaffold,
            traces,
            ctx.gateway,
            config,
            project_id=project,
            asset=asset,
            created_at=rt.now(),
        )
        return ctx.put("narrative_index", index.to_json())

    index_ref = ctx.activity(
        "refine_index",
        _refine,
        {
            "asset": asset_ref,
            "refinement_enabled": config.refinement_enabled,
            "scaffold": scaffold_ref,
            "traces": trace_refs,
        },
    )
    return {"index_ref": index_ref.to_json(), "index_uri": index_ref.uri}


def _scratchpad_fields(doc: dict) -> dict:
    source = doc.get("scratchpad", doc)
    return {
        "media_format": source["media_format"],
        "setting": source["setting"],
        "premise": source["premise"],
        "characters": source["characters"],
        "dynamics": source["dynamics"],
        "open_threads": source["open_threads"],
    }


# --- qa ---------------------------------------------------------------------------


def qa_workflow(ctx, params: dict) -> dict:
    store = ctx.store
    project = ctx.record.project_id
    question = params.get("question", "")
    if not question.strip():
        raise PreconditionError("question must be non-empty")
    try:
        index_ref = store.latest(project, "narrative_index")
    except NotFound:
        raise PreconditionError(f"project {project!r} has no narrative index; run indexing first") from None
    index = NarrativeIndex.from_json(ctx.load(index_ref))

    def _answer():
        response = qa_answer(index, question, ctx.gateway, ctx.runtime.config)
        stream = f"qa-{content_hash(question.encode('utf-8'))[:12]}"
        return ctx.put("qa_response", response.to_json(), stream=stream)

    answer_ref = ctx.activity("answer", _answer, {"index": index_ref, "question": question})
    doc = ctx.load(answer_ref)
    return {"answer": doc["answer"], "answer_ref": answer_ref.to_json(), "response": doc}


# --- edit ---------------------------------------------------------------------------


def edit_workflow(ctx, params: dict) -> dict:
    rt = ctx.runtime
    store = ctx.store
    project = ctx.record.project_id
    config = _effective_config(rt, params)
    prompt = params.get("prompt", "")
    if not prompt.strip():
        raise PreconditionError("editing prompt must be non-empty")
    try:
        index_ref = store.latest(project, "narrative_index")
    except NotFound:
        raise PreconditionError(f"project {project!r} has no narrative index; run indexing first") from None
    index = NarrativeIndex.from_json(ctx.load(index_ref))
    asset = MediaAsset.from_json(ctx.load(store.latest(project, "media_asset")))

    storyboard_ref = ctx.activity(
        "plan_storyboard",
        lambda: ctx.put("storyboard", plan_storyboard(index, prompt, ctx.gateway).to_json()),
        {"index": index_ref, "prompt": prompt},
    )
    storyboard = Storyboard.from_json(ctx.load(storyboard_ref))

    def _narrate():
        segments = write_narration(storyboard, ctx.gateway)
        doc = {
            "kind": "narration",
            "schema_version": SCHEMA_VERSION,
            "segments": [s.to_json() for s in segments],
        }
        return ctx.put("narration", doc)

    narration_ref = ctx.activity("write_narration", _narrate, {"storyboard": storyboard_ref})
    narration = [NarrationSegment.from_json(s) for s in ctx.load(narration_ref)["segments"]]

    def _retrieve(segment: NarrationSegment):
        def run():
            clips = retrieve_and_align(segment, index, ctx.gateway, config)
            clips = [replace(c, rendering_mode=assign_rendering_mode(c)) for c in clips]
            doc = {
                "clips": [c.to_json() for c in clips],
                "kind": "selections",
                "schema_version": SCHEMA_VERSION,
                "section_id": segment.storyboard_section_id,
            }
            return ctx.put("selections", doc, stream=f"selections-{segment.storyboard_section_id}")

        return run

    selection_refs = ctx.parallel(
        [
            (
                f"retrieve_{seg.storyboard_section_id}",
                _retrieve(seg),
                {"index": index_ref, "narration": narration_ref, "section": seg.storyboard_section_id},
            )
            for seg in narration
        ]
    )
    selections = {}
    for ref in selection_refs:
        doc = ctx.load(ref)
        selections[doc["section_id"]] = [ClipSelection.from_json(c) for c in doc["clips"]]

    def _tts(segment: NarrationSegment):
        def run():
            result = rt.tts.synthesize(segment.text)
            digest = content_hash(result.data)[:16]
            audio_uri = f"{project}/renders/audio-{segment.narration_id}-{digest}{result.ext}"
            store.backend.put(audio_uri, result.data)
            doc = {
                "audio_uri": audio_uri,
                "duration_ms": result.duration_ms,
                "kind": "tts_result",
                "narration_id": segment.narration_id,
                "schema_version": SCHEMA_VERSION,
            }
            return ctx.put("tts_result", doc, stream=f"tts-{segment.narration_id}")

        return run

    tts_refs = ctx.parallel(
        [
            (f"tts_{seg.narration_id}", _tts(seg), {"narration": narration_ref, "segment": seg.narration_id})
            for seg in narration
        ]
    )
    tts_results = {doc["narration_id"]: doc for doc in (ctx.load(r) for r in tts_refs)}

    def _music():
        tones = [s.tone for s in storyboard.sections]
        choice = select_music(tones, rt.tracks, ctx.gateway, prompt)
        doc = {
            "kind": "music_choice",
            "music": choice.to_json() if choice else None,
            "schema_version": SCHEMA_VERSION,
            "tones": tones,
        }
        return ctx.put("music_choice", doc)

    music_ref = ctx.activity("select_music", _music, {"storyboard": storyboard_ref})
    music_doc = ctx.load(music_ref)["music"]
    music = MusicRef(music_doc["track_id"], music_doc["uri"]) if music_doc else None

    def _assemble():
        bound = [
            replace(
                seg,
                audio_uri=tts_results[seg.narration_id]["audio_uri"],
                est_duration_ms=tts_results[seg.narration_id]["duration_ms"],
            )
            for seg in narration
        ]
        plan = assemble_edit_plan(
            prompt,
            storyboard,
            bound,
            selections,
            project_id=project,
            assets={asset.asset_id: asset.duration_ms},
            primary_asset_id=asset.asset_id,
            duration_ms=asset.duration_ms,
            index_hash=index.meta.get("content_hash", ""),
            storyboard_ref=storyboard_ref.uri,
            config=config,
            model=ctx.gateway.model_info(),
            created_at=rt.now(),
            music=music,
        )
        return ctx.put("edit_plan", plan.to_json())

    plan_ref = ctx.activity(
        "assemble_plan",
        _assemble,
        {"music": music_ref, "narration": narration_ref, "selections": selection_refs, "tts": tts_refs},
    )

    def _beat_align():
        plan = EditPlan.from_json(ctx.load(plan_ref))
        if music is None:
            return ctx.put("edit_plan", plan.to_json())
        beats = rt.beat_detector.beats(music.uri, plan.total_clip_duration_ms())
        if not beats:
            return ctx.put("edit_plan", plan.to_json())
        aligned = beat_align(plan, BeatGrid(music.uri, tuple(beats)), config, journal=ctx.record.journal)
        return ctx.put("edit_plan", aligned.to_json())

    aligned_ref = ctx.activity("beat_align", _beat_align, {"music": music_ref, "plan": plan_ref})

    def _micro_cut():
        plan = EditPlan.from_json(ctx.load(aligned_ref))
        transcripts = {}
        for asset_id in plan.meta.get("assets", {}):
            spans = rt.transcriber.transcribe(asset_id)
            if spans is not None:
                transcripts[asset_id] = spans
        refined = micro_cut_refine(plan, transcripts, config, journal=ctx.record.journal)
        return ctx.put("edit_plan", refined.to_json())

    refined_ref = ctx.activity("micro_cut", _micro_cut, {"plan": aligned_ref})

    def _crop():
        plan = EditPlan.from_json(ctx.load(refined_ref))
        cropped = dynamic_crop(plan, rt.pose_adapter, journal=ctx.record.journal)
        return ctx.put("edit_plan", cropped.to_json())

    final_plan_ref = ctx.activity("dynamic_crop", _crop, {"plan": refined_ref})
    final_plan = EditPlan.from_json(ctx.load(final_plan_ref))

    def _subtitles():
        bound = [
            replace(
                seg,
                audio_uri=tts_results[seg.narration_id]["audio_uri"],
                est_duration_ms=tts_results[seg.narration_id]["duration_ms"],
            )
            for seg in narration
        ]
        cues = generate_subtitles(final_plan, bound)
        doc = {
            "cues": [c.to_json() for c in cues],
            "kind": "subtitles",
            "schema_version": SCHEMA_VERSION,
        }
        return ctx.put("subtitles", doc)

    subtitles_ref = ctx.activity("generate_subtitles", _subtitles, {"plan": final_plan_ref})
    cues = [
        SubtitleCue(TimeRange.from_json(c["range"]), c["text"])
        for c in ctx.load(subtitles_ref)["cues"]
    ]

    def _graph():
        audio = {nid: doc["audio_uri"] for nid, doc in tts_results.items()}
        graph = build_render_graph(
            final_plan, audio, cues, music, asset_uris={asset.asset_id: asset.uri}
        )
        return ctx.put("render_graph", graph.to_json())

    graph_ref = ctx.activity(
        "build_render_graph", _graph, {"plan": final_plan_ref, "subtitles": subtitles_ref}
    )
    graph = RenderGraph.from_json(ctx.load(graph_ref))

    def _render():
        rendered = execute_render_graph(
            graph, rt.media_engine, store, project, stream=f"render-{final_plan.plan_id}"
        )
        doc = {
            "duration_ms": rendered.duration_ms,
            "kind": "render_result",
            "manifest": rendered.manifest,
            "schema_version": SCHEMA_VERSION,
            "uri": rendered.uri,
        }
        return ctx.put("render_result", doc, stream=f"render-result-{final_plan.plan_id}")

    render_ref = ctx.activity("render", _render, {"graph": graph_ref})
    render_doc = ctx.load(render_ref)
    return {
        "download_uri": render_doc["uri"],
        "plan_id": final_plan.plan_id,
        "plan_ref": final_plan_ref.to_json(),
        "plan_uri": final_plan_ref.uri,
        "render": render_doc,
    }


BUILTIN_DEFINITIONS = {
    "comprehend": comprehend_workflow,
    "qa": qa_workflow,
    "edit": edit_workflow,
}
