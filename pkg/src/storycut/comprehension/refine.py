"""Refinement pass: fuse coarse scaffold and fine scene traces into the index.

With refinement enabled, per-scene model calls re-attribute unknown speakers
and a final synopsis-level call enriches plot points and repairs the
character graph. With refinement disabled the scaffold and traces are
assembled verbatim, which is the ablation path.
"""

from __future__ import annotations

import json
from dataclasses import replace

from ..config import PipelineConfig
from ..errors import IndexCoverageError
from ..gateway.core import ModelGateway, PromptKind
from ..gateway.structured import OutputInvalid
from ..model import (
    UNATTRIBUTED,
    CharacterEdge,
    CharacterGraph,
    CharacterNode,
    Dialogue,
    GlobalSynopsis,
    MediaAsset,
    NarrativeIndex,
    PlotPoint,
    SceneTrace,
    build_meta,
    finalize_artifact,
)
from ..timecode import TimeRange
from ..validation import COVERAGE_GAP_TOLERANCE_MS
from .scaffold import GlobalScaffold
from .scenes import _synopsis_text


def check_coverage(traces: tuple[SceneTrace, ...], duration_ms: int):
    """Raise IndexCoverageError naming the first gap larger than 1 s."""
    covered_to = 0
    for trace in traces:
        if trace.range.start_ms - covered_to > COVERAGE_GAP_TOLERANCE_MS:
            raise IndexCoverageError(
                f"scene coverage gap: [{covered_to / 1000:.3f}s, "
                f"{trace.range.start_ms / 1000:.3f}s) has no trace"
            )
        covered_to = max(covered_to, trace.range.end_ms)
    if duration_ms - covered_to > COVERAGE_GAP_TOLERANCE_MS:
        raise IndexCoverageError(
            f"scene coverage gap: [{covered_to / 1000:.3f}s, {duration_ms / 1000:.3f}s) has no trace"
        )


def count_unattributed(index: NarrativeIndex) -> int:
    return sum(
        1
        for scene in index.scenes
        for ann in scene.annotations
        if ann.dialogue is not None and ann.dialogue.speaker == UNATTRIBUTED
    )


def _trace_json_text(trace: SceneTrace) -> str:
    return json.dumps(trace.to_json(), sort_keys=True, ensure_ascii=False)


def _reattribute_scene(
    trace: SceneTrace,
    scaffold: GlobalScaffold,
    gateway: ModelGateway,
    warnings: list[str],
) -> SceneTrace:
    unattributed = [a.at_ms for a in trace.annotations if a.dialogue and a.dialogue.speaker == UNATTRIBUTED]
    if not unattributed:
        return trace
    request = gateway.request(
        PromptKind.REFINE,
        [
            ("synopsis", _synopsis_text(scaffold)),
            ("characters", scaffold.draft_graph.to_adjacency_text()),
            ("trace", _trace_json_text(trace)),
        ],
    )

    def _wants_attributions(value):
        if "attributions" not in value:
            raise OutputInvalid("scene refinement requires an attributions section")

    value = gateway.complete(request, validator=_wants_attributions).value
    known = scaffold.draft_graph.known_names()
    fixes: dict[int, str] = {}
    for att in value["attributions"]:
        canonical = known.get(att["speaker"].casefold())
        if canonical is None:
            warnings.append(
                f"{trace.scene_id}: refinement proposed unknown speaker {att['speaker']!r}; kept unattributed"
            )
            continue
        fixes[att["at_ms"]] = canonical

    annotations = []
    for ann in trace.annotations:
        if ann.dialogue is not None and ann.dialogue.speaker == UNATTRIBUTED and ann.at_ms in fixes:
            ann = replace(ann, dialogue=Dialogue(fixes[ann.at_ms], ann.dialogue.text))
        annotations.append(ann)
    return replace(trace, annotations=tuple(annotations))


def _refine_synopsis(
    scaffold: GlobalScaffold, gateway: ModelGateway, warnings: list[str]
) -> tuple[GlobalSynopsis, CharacterGraph]:
    request = gateway.request(
        PromptKind.REFINE,
        [
            ("synopsis", _synopsis_text(scaffold)),
            ("characters", scaffold.draft_graph.to_adjacency_text()),
            ("summaries", scaffold.summaries_text()),
        ],
    )

    def _wants_plot_points(value):
        if "plot_points" not in value:
            raise OutputInvalid("synopsis refinement requires a plot_points section")

    value = gateway.complete(request, validator=_wants_plot_points).value
    plot_points = tuple(
        PlotPoint(
            p["text"],
            TimeRange(p["start_ms"], p["end_ms"]) if p.get("start_ms") is not None else None,
        )
        for p in value["plot_points"]
    )
    synopsis = replace(scaffold.draft_synopsis, plot_points=plot_points)

    graph = scaffold.draft_graph
    if "characters" in value:
        graph = _merge_graph_repairs(graph, value["characters"], warnings)
    return synopsis, graph


def _merge_graph_repairs(graph: CharacterGraph, section: dict, warnings: list[str]) -> CharacterGraph:
    nodes = list(graph.nodes)
    index = {n.name.casefold(): i for i, n in enumerate(nodes)}
    for node in section.get("nodes", []):
        key = node["name"].casefold()
        if key in index:
            i = index[key]
            existing = nodes[i]
            aliases = tuple(dict.fromkeys([*existing.aliases, *node.get("aliases", ())]))
            description = node["description"] or existing.description
            nodes[i] = CharacterNode(existing.name, aliases, description)
        else:
            index[key] = len(nodes)
            nodes.append(CharacterNode(node["name"], tuple(node.get("aliases", ())), node["description"]))

    merged = CharacterGraph(tuple(nodes), graph.edges)
    known = merged.known_names()
    edges = list(graph.edges)
    have = {(e.source, e.target, e.relationship) for e in edges}
    for edge in section.get("edges", []):
        src, dst = known.get(edge["from"].casefold()), known.get(edge["to"].casefold())
        if src is None or dst is None:
            warnings.append(f"dropped refined edge to unknown name: {edge['from']} -> {edge['to']}")
            continue
        key = (src, dst, edge["relationship"])
        if key not in have:
            have.add(key)
            edges.append(CharacterEdge(src, dst, edge["relationship"]))
    return CharacterGraph(tuple(nodes), tuple(edges))


def refine_index(
    scaffold: GlobalScaffold,
    traces: list[SceneTrace],
    gateway: ModelGateway,
    config: PipelineConfig,
    *,
    project_id: str,
    asset: MediaAsset,
    created_at: str,
) -> NarrativeIndex:
    """Assemble the final NarrativeIndex, refined or verbatim per config."""
    ordered = tuple(sorted(traces, key=lambda t: t.range.start_ms))
    check_coverage(ordered, asset.duration_ms)

    warnings: list[str] = list(scaffold.warnings)
    for trace in ordered:
        warnings.extend(trace.warnings)

    if config.refinement_enabled:
        refined_traces = tuple(
            _reattribute_scene(trace, scaffold, gateway, warnings) for trace in ordered
        )
        synopsis, graph = _refine_synopsis(scaffold, gateway, warnings)
    else:
        refined_traces = ordered
        synopsis, graph = scaffold.draft_synopsis, scaffold.draft_graph

    meta = build_meta(
        config=config,
        assets={asset.asset_id: asset.duration_ms},
        primary_asset_id=asset.asset_id,
        duration_ms=asset.duration_ms,
        model=gateway.model_info(),
        refinement_enabled=config.refinement_enabled,
        created_at=created_at,
        warnings=warnings,
    )
    index = NarrativeIndex(
        project_id=project_id,
        synopsis=synopsis,
        characters=graph,
        scenes=tuple(replace(t, warnings=()) for t in refined_traces),
        meta=meta,
    )
    doc = finalize_artifact(index.to_json(), created_at)
    return NarrativeIndex.from_json(doc)
